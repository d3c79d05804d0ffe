#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fieldlabel/io.hpp"
#include "fieldlabel/segmentation.hpp"
#include "fieldlabel/selection.hpp"

namespace fieldlabel::pipeline {

struct PipelineConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path output_dir = "out";
    SegmentationParams segmentation;
    std::vector<std::string> strategies;  // empty means the eight standard strategies
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    int workers = 1;
    bool strict = false;

    std::vector<std::string> strategy_ids() const {
        if (!strategies.empty()) return strategies;
        std::vector<std::string> ids;
        for (const auto& s : standard_strategies()) ids.push_back(s.id());
        return ids;
    }

    void validate() const {
        if (manifest_path.empty()) throw UsageError("no manifest given (--manifest)");
        segmentation.validate();
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0,1)");
        if (workers < 1) throw UsageError("workers must be >= 1");
        for (const auto& id : strategies) {
            if (id != "human") parse_strategy(id);
        }
    }

    /// Stable text of every setting that influences artifacts (worker count and strictness excluded).
    std::string canonical() const {
        std::string s = "t_bnd=" + fmt_roundtrip(segmentation.t_bnd) + ";t_ext=" + fmt_roundtrip(segmentation.t_ext) +
                        ";connectivity=" + std::to_string(segmentation.connectivity) + ";train_fraction=" +
                        fmt_roundtrip(train_fraction) + ";seed=" + std::to_string(seed) + ";strategies=";
        for (const auto& id : strategy_ids()) s += id + ",";
        return s;
    }
};

/// Parses `key = value` lines; `#` starts a comment, values may be double-quoted, and
/// `[section]` headers are accepted but ignored.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
        ++n;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) throw UsageError("config line " + std::to_string(n) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',' || c == ' ' || c == '[' || c == ']' || c == '"') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

/// Applies a parsed config document; unknown keys are rejected so typos do not pass silently.
/// Keys other than the pipeline's own (e.g. serve settings) are returned untouched in `extra`.
inline void apply_config(PipelineConfig& cfg, const std::map<std::string, std::string>& kv,
                         std::map<std::string, std::string>* extra = nullptr) {
    auto num = [](const std::string& key, const std::string& v) {
        try {
            return parse_double(v);
        } catch (const DataError&) {
            throw UsageError("config key '" + key + "': not a number: " + v);
        }
    };
    for (const auto& [k, v] : kv) {
        if (k == "manifest") cfg.manifest_path = v;
        else if (k == "out") cfg.output_dir = v;
        else if (k == "strategy" || k == "strategies") cfg.strategies = split_list(v);
        else if (k == "t_bnd" || k == "t-bnd") cfg.segmentation.t_bnd = num(k, v);
        else if (k == "t_ext" || k == "t-ext") cfg.segmentation.t_ext = num(k, v);
        else if (k == "connectivity") cfg.segmentation.connectivity = static_cast<int>(num(k, v));
        else if (k == "workers") cfg.workers = static_cast<int>(num(k, v));
        else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(num(k, v));
        else if (k == "train_fraction") cfg.train_fraction = num(k, v);
        else if (k == "strict") cfg.strict = (v == "true" || v == "1" || v == "yes");
        else if (k == "port" || k == "store" || k == "images" || k == "host") {
            if (extra) (*extra)[k] = v;
        } else {
            throw UsageError("unknown config key '" + k + "'");
        }
    }
}

}  // namespace fieldlabel::pipeline
