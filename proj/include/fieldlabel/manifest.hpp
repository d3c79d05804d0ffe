#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldlabel/eval_object.hpp"
#include "fieldlabel/io.hpp"

namespace fieldlabel {

enum class Split { train, validation, test, unlabeled };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
        case Split::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    if (s == "unlabeled") return Split::unlabeled;
    throw DataError("unknown split '" + s + "' (expected train, validation, test or unlabeled)");
}

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }
    friend bool operator==(const Date&, const Date&) = default;
};

/// Strict YYYY-MM-DD with calendar validation.
inline Date parse_date(const std::string& s) {
    Date d;
    char tail = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3) {
        throw DataError("unparseable date '" + s + "' (expected YYYY-MM-DD)");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month{static_cast<unsigned>(d.month)},
                                          std::chrono::day{static_cast<unsigned>(d.day)}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + s + "'");
    return d;
}

inline Season season_of(const Date& d) { return season_of_month(d.month); }

struct SiteRecord {
    std::string site_id;
    Date acquisition_date;
    std::string province;
    Split split = Split::unlabeled;
    std::string raster_path;                    // resolved against the manifest directory on load
    std::optional<std::string> reference_path;  // likewise

    Season season() const { return season_of(acquisition_date); }
    friend bool operator==(const SiteRecord&, const SiteRecord&) = default;
};

inline nlohmann::json to_json(const SiteRecord& r) {
    nlohmann::json j;
    j["site_id"] = r.site_id;
    j["acquisition_date"] = r.acquisition_date.iso();
    j["province"] = r.province;
    j["split"] = to_string(r.split);
    j["raster_path"] = r.raster_path;
    if (r.reference_path) j["reference_path"] = *r.reference_path;
    return j;
}

inline SiteRecord site_record_from_json(const nlohmann::json& j) {
    auto str = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string()) throw DataError(std::string("manifest record lacks string field '") + key + "'");
        return j[key].get<std::string>();
    };
    SiteRecord r;
    r.site_id = str("site_id");
    if (r.site_id.empty() || r.site_id.find_first_of("/\\") != std::string::npos || r.site_id == "." || r.site_id == "..") {
        throw DataError("invalid site_id '" + r.site_id + "'");
    }
    r.acquisition_date = parse_date(str("acquisition_date"));
    r.province = str("province");
    r.split = parse_split(str("split"));
    r.raster_path = str("raster_path");
    if (j.contains("reference_path") && !j["reference_path"].is_null()) r.reference_path = str("reference_path");
    return r;
}

inline std::vector<SiteRecord> parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {}) {
    std::vector<SiteRecord> out;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SiteRecord r;
        try {
            r = site_record_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(r.site_id).second) throw DataError("duplicate site_id '" + r.site_id + "' in manifest");
        auto resolve = [&](const std::string& p) {
            const std::filesystem::path path(p);
            return (path.is_absolute() || base_dir.empty() ? path : base_dir / path).lexically_normal().string();
        };
        r.raster_path = resolve(r.raster_path);
        if (r.reference_path) r.reference_path = resolve(*r.reference_path);
        out.push_back(std::move(r));
    }
    return out;
}

/// Sites sorted by site_id; relative paths resolve against the manifest's directory.
inline std::vector<SiteRecord> read_manifest(const std::filesystem::path& path) {
    auto sites = parse_manifest(read_text_file(path), path.parent_path());
    std::sort(sites.begin(), sites.end(), [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });
    return sites;
}

inline std::string dump_manifest(const std::vector<SiteRecord>& sites) {
    std::string out;
    for (const auto& s : sites) out += to_json(s).dump() + "\n";
    return out;
}

}  // namespace fieldlabel
