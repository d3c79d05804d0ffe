#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldlabel/io.hpp"
#include "fieldlabel/labelset.hpp"
#include "fieldlabel/manifest.hpp"

namespace fieldlabel::review {

namespace fs = std::filesystem;

/// Unknown site or instance; the HTTP layer maps this to 404.
class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Verdict { pending, accepted, rejected };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pending: return "pending";
        case Verdict::accepted: return "accepted";
        case Verdict::rejected: return "rejected";
    }
    return "pending";
}

inline Verdict parse_verdict(const std::string& s) {
    if (s == "pending") return Verdict::pending;
    if (s == "accepted") return Verdict::accepted;
    if (s == "rejected") return Verdict::rejected;
    throw UsageError("malformed verdict '" + s + "' (expected accepted, rejected or pending)");
}

enum class ExportPolicy { accepted_only, accepted_plus_pending };

inline ExportPolicy parse_policy(const std::string& s) {
    if (s == "accepted_only") return ExportPolicy::accepted_only;
    if (s == "accepted_plus_pending") return ExportPolicy::accepted_plus_pending;
    throw UsageError("unknown export policy '" + s + "' (expected accepted_only or accepted_plus_pending)");
}

struct ReviewDecision {
    std::string site_id;
    std::int32_t instance_id = 0;
    Verdict verdict = Verdict::pending;
    std::string reviewer;
    std::string timestamp;  // ISO-8601 UTC; assigned by the store when empty
    long long seq = 0;      // position in the decision log; assigned by the store

    friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

inline nlohmann::ordered_json to_json(const ReviewDecision& d) {
    nlohmann::ordered_json j;
    j["seq"] = d.seq;
    j["site_id"] = d.site_id;
    j["instance_id"] = d.instance_id;
    j["verdict"] = to_string(d.verdict);
    j["reviewer"] = d.reviewer;
    j["timestamp"] = d.timestamp;
    return j;
}

inline ReviewDecision decision_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("decision must be a JSON object");
    ReviewDecision d;
    try {
        d.site_id = j.at("site_id").get<std::string>();
        d.instance_id = j.at("instance_id").get<std::int32_t>();
        d.verdict = parse_verdict(j.value("verdict", std::string("pending")));
        d.reviewer = j.value("reviewer", std::string());
        d.timestamp = j.value("timestamp", std::string());
        d.seq = j.value("seq", 0LL);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("malformed decision: ") + e.what());
    }
    return d;
}

inline std::string utc_now_iso() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// A site's selection outputs, keyed by strategy id.
struct SiteCandidates {
    SiteRecord site;
    std::map<std::string, LabelSet> by_strategy;

    std::set<std::int32_t> instance_ids(const std::optional<std::string>& strategy = std::nullopt) const {
        std::set<std::int32_t> ids;
        for (const auto& [id, set] : by_strategy) {
            if (strategy && id != *strategy) continue;
            for (const auto& l : set.labels)
                if (l.instance_id) ids.insert(*l.instance_id);
        }
        return ids;
    }
};

/// Reads <select_dir>/<site_id>/<strategy>.geojson for every manifest site.
inline std::map<std::string, SiteCandidates> load_candidates(const fs::path& select_dir, const std::vector<SiteRecord>& sites) {
    std::map<std::string, SiteCandidates> out;
    for (const auto& s : sites) {
        SiteCandidates c;
        c.site = s;
        const auto dir = select_dir / s.site_id;
        if (fs::exists(dir)) {
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.path().extension() != ".geojson") continue;
                c.by_strategy[e.path().stem().string()] = label_set_from_features(read_geojson(e.path()), s.site_id);
            }
        }
        out.emplace(s.site_id, std::move(c));
    }
    return out;
}

struct SiteFilter {
    std::optional<Split> split;
    std::optional<std::string> strategy;
    std::optional<std::string> status;  // "pending" (some candidate undecided) or "reviewed"
};

struct SiteSummary {
    std::string site_id;
    std::size_t n_candidates = 0;
    std::size_t n_reviewed = 0;
    std::string province;
    Season season = Season::dry;
    Split split = Split::unlabeled;
    std::vector<std::string> strategies;
};

inline nlohmann::ordered_json to_json(const SiteSummary& s) {
    nlohmann::ordered_json j;
    j["site_id"] = s.site_id;
    j["n_candidates"] = s.n_candidates;
    j["n_reviewed"] = s.n_reviewed;
    j["province"] = s.province;
    j["season"] = to_string(s.season);
    j["split"] = to_string(s.split);
    j["strategies"] = s.strategies;
    return j;
}

struct ExportedSite {
    std::string site_id;
    LabelSet labels;
    fs::path path;
};

/// Decision store: an append-only JSONL log plus a compacted snapshot. The live state is the
/// snapshot followed by every log entry with a higher sequence number, last write wins.
/// Reads take a shared lock; all writes go through one exclusive lock, so log lines never interleave.
class ReviewStore {
public:
    ReviewStore(fs::path store_dir, std::map<std::string, SiteCandidates> candidates, std::size_t compact_every = 256)
        : dir_(std::move(store_dir)), candidates_(std::move(candidates)), compact_every_(compact_every) {
        fs::create_directories(dir_);
        replay();
    }

    fs::path log_path() const { return dir_ / "decisions.log"; }
    fs::path snapshot_path() const { return dir_ / "snapshot.json"; }
    const fs::path& dir() const { return dir_; }

    std::vector<SiteSummary> list_sites(const SiteFilter& f = {}) const {
        std::shared_lock lock(mu_);
        std::vector<SiteSummary> out;
        for (const auto& [id, c] : candidates_) {
            if (f.split && c.site.split != *f.split) continue;
            const auto ids = c.instance_ids(f.strategy);
            if (f.strategy && ids.empty()) continue;
            SiteSummary s;
            s.site_id = id;
            s.province = c.site.province;
            s.season = c.site.season();
            s.split = c.site.split;
            for (const auto& [sid, _] : c.by_strategy) s.strategies.push_back(sid);
            s.n_candidates = ids.size();
            for (auto i : ids) s.n_reviewed += verdict_locked(id, i) != Verdict::pending ? 1 : 0;
            if (f.status) {
                const bool pending = s.n_reviewed < s.n_candidates;
                if (*f.status == "pending" && !pending) continue;
                if (*f.status == "reviewed" && pending) continue;
                if (*f.status != "pending" && *f.status != "reviewed") {
                    throw UsageError("unknown review status '" + *f.status + "' (expected pending or reviewed)");
                }
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    /// Candidates as GeoJSON (scores, class and current verdict per feature) plus the site's decisions.
    /// Without a strategy, every strategy's candidates are merged, one feature per instance.
    nlohmann::ordered_json site_payload(const std::string& site_id, const std::optional<std::string>& strategy = std::nullopt,
                                        const std::string& image_url = {}) const {
        std::shared_lock lock(mu_);
        const auto& c = site_locked(site_id);
        if (strategy && !c.by_strategy.contains(*strategy)) {
            throw NotFound("site " + site_id + " has no candidates for strategy '" + *strategy + "'");
        }
        LabelSet merged;
        merged.site_id = site_id;
        std::set<std::int32_t> seen;
        for (const auto& [sid, set] : c.by_strategy) {
            if (strategy && sid != *strategy) continue;
            merged.crs_id = set.crs_id;
            for (const auto& l : set.labels) {
                if (l.instance_id && !seen.insert(*l.instance_id).second) continue;
                merged.labels.push_back(l);
            }
        }
        auto fc = to_json(to_feature_collection(merged));
        for (auto& f : fc["features"]) {
            const auto id = f["properties"].value("instance_id", 0);
            f["properties"]["verdict"] = to_string(verdict_locked(site_id, id));
        }
        nlohmann::ordered_json j;
        j["site_id"] = site_id;
        j["province"] = c.site.province;
        j["season"] = to_string(c.site.season());
        j["split"] = to_string(c.site.split);
        j["image"] = image_url.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(image_url);
        j["strategy"] = strategy ? nlohmann::ordered_json(*strategy) : nlohmann::ordered_json(nullptr);
        j["candidates"] = fc;
        auto& decisions = j["decisions"] = nlohmann::ordered_json::array();
        for (const auto& [key, d] : state_)
            if (key.first == site_id) decisions.push_back(to_json(d));
        return j;
    }

    /// Persists one decision and returns it as stored (with sequence number and timestamp).
    ReviewDecision post(ReviewDecision d) {
        std::unique_lock lock(mu_);
        validate_locked(d);
        return append_locked(std::move(d));
    }

    /// Site-level convenience: one decision per candidate instance (optionally of one strategy).
    std::vector<ReviewDecision> decide_site(const std::string& site_id, Verdict verdict, const std::string& reviewer,
                                            const std::optional<std::string>& strategy = std::nullopt) {
        std::unique_lock lock(mu_);
        const auto& c = site_locked(site_id);
        if (strategy && !c.by_strategy.contains(*strategy)) {
            throw NotFound("site " + site_id + " has no candidates for strategy '" + *strategy + "'");
        }
        std::vector<ReviewDecision> out;
        for (auto id : c.instance_ids(strategy)) {
            ReviewDecision d;
            d.site_id = site_id;
            d.instance_id = id;
            d.verdict = verdict;
            d.reviewer = reviewer;
            out.push_back(append_locked(std::move(d)));
        }
        return out;
    }

    Verdict verdict(const std::string& site_id, std::int32_t instance_id) const {
        std::shared_lock lock(mu_);
        return verdict_locked(site_id, instance_id);
    }

    std::map<std::pair<std::string, std::int32_t>, ReviewDecision> decisions() const {
        std::shared_lock lock(mu_);
        return state_;
    }

    long long last_seq() const {
        std::shared_lock lock(mu_);
        return seq_;
    }

    /// Writes the snapshot, then truncates the log. A crash between the two leaves log entries
    /// already covered by the snapshot, which replay skips by sequence number.
    void compact() {
        std::unique_lock lock(mu_);
        compact_locked();
    }

    /// Curated label files for one strategy under <store>/export/<strategy>/<site>.geojson.
    std::vector<ExportedSite> export_curated(const std::string& strategy, ExportPolicy policy) const {
        std::shared_lock lock(mu_);
        std::vector<ExportedSite> out;
        for (const auto& [site_id, c] : candidates_) {
            const auto it = c.by_strategy.find(strategy);
            if (it == c.by_strategy.end()) continue;
            ExportedSite e;
            e.site_id = site_id;
            e.labels.site_id = site_id;
            e.labels.crs_id = it->second.crs_id;
            for (const auto& l : it->second.labels) {
                const auto v = l.instance_id ? verdict_locked(site_id, *l.instance_id) : Verdict::pending;
                const bool keep = v == Verdict::accepted || (policy == ExportPolicy::accepted_plus_pending && v == Verdict::pending);
                if (!keep) continue;
                Label copy = l;
                copy.provenance = screened_provenance(strategy);
                e.labels.labels.push_back(std::move(copy));
            }
            e.path = dir_ / "export" / strategy / (site_id + ".geojson");
            out.push_back(std::move(e));
        }
        if (out.empty()) throw NotFound("no candidates for strategy '" + strategy + "'");
        for (const auto& e : out) write_file_atomic(e.path, dump_label_set(e.labels));
        return out;
    }

private:
    const SiteCandidates& site_locked(const std::string& site_id) const {
        const auto it = candidates_.find(site_id);
        if (it == candidates_.end()) throw NotFound("unknown site '" + site_id + "'");
        return it->second;
    }

    Verdict verdict_locked(const std::string& site_id, std::int32_t id) const {
        const auto it = state_.find({site_id, id});
        return it == state_.end() ? Verdict::pending : it->second.verdict;
    }

    void validate_locked(const ReviewDecision& d) const {
        const auto& c = site_locked(d.site_id);
        if (!c.instance_ids().contains(d.instance_id)) {
            throw NotFound("site " + d.site_id + " has no candidate instance " + std::to_string(d.instance_id));
        }
    }

    ReviewDecision append_locked(ReviewDecision d) {
        d.seq = ++seq_;
        if (d.timestamp.empty()) d.timestamp = utc_now_iso();
        {
            std::ofstream log(log_path(), std::ios::binary | std::ios::app);
            if (!log) throw DataError("cannot open decision log " + log_path().string());
            log << to_json(d).dump() << '\n';
            log.flush();
            if (!log) throw DataError("write failed for decision log " + log_path().string());
        }
        state_[{d.site_id, d.instance_id}] = d;
        if (++since_compact_ >= compact_every_) compact_locked();
        return d;
    }

    void compact_locked() {
        nlohmann::ordered_json j;
        j["seq"] = seq_;
        auto& arr = j["decisions"] = nlohmann::ordered_json::array();
        for (const auto& [_, d] : state_) arr.push_back(to_json(d));
        write_file_atomic(snapshot_path(), j.dump() + "\n");
        write_file_atomic(log_path(), std::string_view{});
        since_compact_ = 0;
    }

    void replay() {
        long long snapshot_seq = 0;
        if (fs::exists(snapshot_path())) {
            const auto j = nlohmann::json::parse(read_text_file(snapshot_path()));
            snapshot_seq = j.at("seq").get<long long>();
            for (const auto& e : j.at("decisions")) {
                auto d = decision_from_json(e);
                state_[{d.site_id, d.instance_id}] = d;
            }
            seq_ = snapshot_seq;
        }
        if (!fs::exists(log_path())) return;
        std::istringstream in(read_text_file(log_path()));
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line))
            if (!line.empty()) lines.push_back(line);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            ReviewDecision d;
            try {
                d = decision_from_json(nlohmann::json::parse(lines[i]));
            } catch (const std::exception&) {
                // A torn final line is what a crash mid-append leaves behind; anything earlier is corruption.
                if (i + 1 == lines.size()) {
                    std::string kept;
                    for (std::size_t k = 0; k < i; ++k) kept += lines[k] + "\n";
                    write_file_atomic(log_path(), kept);
                    break;
                }
                throw DataError("corrupt decision log line " + std::to_string(i + 1));
            }
            if (d.seq <= snapshot_seq) continue;
            state_[{d.site_id, d.instance_id}] = d;
            seq_ = std::max(seq_, d.seq);
            ++since_compact_;
        }
    }

    fs::path dir_;
    std::map<std::string, SiteCandidates> candidates_;
    std::size_t compact_every_;
    std::size_t since_compact_ = 0;
    long long seq_ = 0;
    std::map<std::pair<std::string, std::int32_t>, ReviewDecision> state_;
    mutable std::shared_mutex mu_;
};

}  // namespace fieldlabel::review
