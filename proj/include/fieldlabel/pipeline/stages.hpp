#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldlabel/eval_object.hpp"
#include "fieldlabel/eval_site.hpp"
#include "fieldlabel/io.hpp"
#include "fieldlabel/labelset.hpp"
#include "fieldlabel/manifest.hpp"
#include "fieldlabel/multitask.hpp"
#include "fieldlabel/pipeline/artifacts.hpp"
#include "fieldlabel/pipeline/config.hpp"
#include "fieldlabel/pipeline/worker_pool.hpp"
#include "fieldlabel/raster_io.hpp"
#include "fieldlabel/segmentation.hpp"
#include "fieldlabel/selection.hpp"
#include "fieldlabel/summary.hpp"

namespace fieldlabel::pipeline {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitPartial = 3;

enum class Stage { segment, score, select, labels, eval_object, eval_site, summarize };

inline std::string to_string(Stage s) {
    switch (s) {
        case Stage::segment: return "segment";
        case Stage::score: return "score";
        case Stage::select: return "select";
        case Stage::labels: return "labels";
        case Stage::eval_object: return "eval-object";
        case Stage::eval_site: return "eval-site";
        case Stage::summarize: return "summarize";
    }
    return "?";
}

inline Stage parse_stage(const std::string& s) {
    for (auto st : {Stage::segment, Stage::score, Stage::select, Stage::labels, Stage::eval_object, Stage::eval_site,
                    Stage::summarize}) {
        if (to_string(st) == s) return st;
    }
    throw UsageError("unknown stage '" + s + "'");
}

struct SiteOutcome {
    enum class Status { ok, skipped, failed, not_run };
    std::string site_id;
    Status status = Status::not_run;
    std::string error;
    double seconds = 0.0;
    std::map<std::string, std::string> input_hashes;
};

inline std::string to_string(SiteOutcome::Status s) {
    switch (s) {
        case SiteOutcome::Status::ok: return "ok";
        case SiteOutcome::Status::skipped: return "skipped";
        case SiteOutcome::Status::failed: return "failed";
        case SiteOutcome::Status::not_run: return "not_run";
    }
    return "?";
}

struct StageResult {
    Stage stage = Stage::segment;
    std::vector<SiteOutcome> sites;
    std::string global_error;
    int exit_code = kExitOk;

    std::size_t count(SiteOutcome::Status s) const {
        return static_cast<std::size_t>(
            std::count_if(sites.begin(), sites.end(), [s](const SiteOutcome& o) { return o.status == s; }));
    }
};

/// Output locations: <out>/<stage>/<site_id>/...
struct Layout {
    fs::path out;

    fs::path stage_dir(Stage s) const { return out / to_string(s); }
    fs::path site_dir(Stage s, const std::string& site_id) const { return stage_dir(s) / site_id; }
    fs::path instances(const std::string& site) const { return site_dir(Stage::segment, site) / "instances.tif"; }
    fs::path scores(const std::string& site) const { return site_dir(Stage::score, site) / "scores.csv"; }
    fs::path selection(const std::string& site, const std::string& strategy) const {
        return site_dir(Stage::select, site) / (strategy + ".geojson");
    }
    fs::path matches(const std::string& site) const { return site_dir(Stage::eval_object, site) / "matches.csv"; }
    fs::path site_eval(const std::string& site) const { return site_dir(Stage::eval_site, site) / "site.csv"; }
};

// ---------------------------------------------------------------------------------------------
// Per-site computations shared by the stages and by anyone calling the library directly.

inline LabelSet load_reference(const SiteRecord& site, const std::string& crs_id) {
    if (!site.reference_path) throw DataError("site " + site.site_id + " has no reference labels");
    auto refs = label_set_from_features(read_geojson(*site.reference_path), site.site_id);
    if (!refs.crs_id.empty() && !crs_id.empty() && refs.crs_id != crs_id) {
        throw DataError("site " + site.site_id + ": reference CRS '" + refs.crs_id + "' differs from raster CRS '" + crs_id + "'");
    }
    return refs;
}

inline InstanceMap load_instances(const fs::path& path) {
    auto [labels, t] = read_label_grid(path);
    return instance_map_from_labels(std::move(labels), t);
}

inline std::vector<FieldMatch> match_site(const SiteRecord& site, const InstanceMap& pred, const LabelSet& refs) {
    return match_by_centroid(pred, refs, MatchContext{site.site_id, site.season(), site.province});
}

/// Site-level size errors, mean sizes, raster-centre coordinates and (when the reference carries
/// non-cropland patches) pixel metrics of the predicted non-cropland mask p_ext < t_ext.
inline SiteEvalRecord evaluate_site(const SiteRecord& site, const ProbabilityRaster& raster, const LabelSet& refs,
                                    std::span<const FieldMatch> matches, double t_ext) {
    SiteEvalRecord r;
    r.site_id = site.site_id;
    r.province = site.province;
    r.season = site.season();
    const auto [cx, cy] = raster.transform.to_map(raster.width() / 2.0, raster.height() / 2.0);
    r.centroid = {cx, cy};
    if (!matches.empty()) {
        r.errors = site_size_errors(matches, site.site_id);
        double ref_sum = 0.0, pred_sum = 0.0;
        for (const auto& m : matches) {
            ref_sum += m.ref_area_ha;
            pred_sum += m.pred_id ? m.pred_area_ha : 0.0;
        }
        r.mean_ref_area_ha = ref_sum / static_cast<double>(matches.size());
        r.mean_pred_area_ha = pred_sum / static_cast<double>(matches.size());
    }
    if (refs.count(LabelClass::non_cropland) > 0) {
        const int w = raster.width(), h = raster.height();
        Mask ref_noncrop(w, h, 0), ref_crop(w, h, 0), predicted(w, h, 0);
        for (const auto& l : refs.labels) {
            auto& target = l.label_class == LabelClass::non_cropland ? ref_noncrop : ref_crop;
            for (const auto& p : rasterize_polygon(l.geometry, raster.transform, w, h)) target(p.row, p.col) = 1;
        }
        for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = raster.p_ext[i] < t_ext ? 1 : 0;
        r.noncrop = noncrop_pixel_metrics(predicted, ref_noncrop, ref_crop);
    }
    if (!r.errors && !r.noncrop) throw DataError("site " + site.site_id + ": reference has no labels to evaluate");
    return r;
}

/// Chip manifest lines and kept-chip rasters for one label source at one site.
inline std::map<std::string, std::string> label_chip_artifacts(const std::string& site_id, const std::string& source,
                                                               const std::string& split, const LabelSet& labels,
                                                               int width, int height, const GeoTransform& t) {
    std::map<std::string, std::string> out;
    const auto full = rasterize_labels(labels, width, height, t);
    std::string manifest;
    for (const auto& chip : chip_labels(full, site_id)) {
        const bool kept = chip.label.has_field();
        nlohmann::ordered_json j;
        j["site_id"] = site_id;
        j["source"] = source;
        j["row_index"] = chip.row_index;
        j["col_index"] = chip.col_index;
        j["kept"] = kept;
        j["split"] = split;
        manifest += j.dump() + "\n";
        if (kept) {
            const auto bytes = encode_multitask(chip.label);
            out[source + "/r" + std::to_string(chip.row_index) + "_c" + std::to_string(chip.col_index) + ".tif"] =
                std::string(bytes.begin(), bytes.end());
        }
    }
    out[source + "/chips.jsonl"] = manifest;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Stage runner

struct SiteTask {
    std::vector<std::pair<std::string, fs::path>> inputs;  // logical name, path
    std::function<std::map<std::string, std::string>()> produce;  // relative file name -> bytes
};

namespace detail {

inline std::string bytes_of(const std::vector<std::uint8_t>& v) { return std::string(v.begin(), v.end()); }

inline bool resume_ok(const fs::path& dir, const std::string& key) {
    const auto key_path = dir / ".key";
    if (!fs::exists(key_path)) return false;
    std::istringstream in(read_text_file(key_path));
    std::string line;
    if (!std::getline(in, line) || line != key) return false;
    while (std::getline(in, line))
        if (!line.empty() && !fs::exists(dir / line)) return false;
    return true;
}

inline void remove_stale(const fs::path& dir, const std::map<std::string, std::string>& keep) {
    if (!fs::exists(dir)) return;
    std::vector<fs::path> stale;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel != ".key" && !keep.contains(rel)) stale.push_back(e.path());
    }
    for (const auto& p : stale) fs::remove(p);
}

inline nlohmann::ordered_json ledger_json(const StageResult& r, const PipelineConfig& cfg, double total_seconds) {
    nlohmann::ordered_json j;
    j["stage"] = to_string(r.stage);
    j["config"] = cfg.canonical();
    j["config_hash"] = hex64(fnv1a(cfg.canonical()));
    j["workers"] = cfg.workers;
    j["strict"] = cfg.strict;
    j["exit_code"] = r.exit_code;
    if (!r.global_error.empty()) j["error"] = r.global_error;
    j["total_seconds"] = total_seconds;
    auto& sites = j["sites"] = nlohmann::ordered_json::array();
    for (const auto& s : r.sites) {
        nlohmann::ordered_json e;
        e["site_id"] = s.site_id;
        e["status"] = to_string(s.status);
        if (!s.error.empty()) e["error"] = s.error;
        e["seconds"] = s.seconds;
        e["inputs"] = s.input_hashes;
        sites.push_back(std::move(e));
    }
    return j;
}

}  // namespace detail

/// Runs one task per site on the worker pool. A site whose inputs hash to the key recorded by a
/// previous run, and whose outputs still exist, is skipped.
inline StageResult run_sites(Stage stage, const PipelineConfig& cfg, const Layout& layout,
                             const std::vector<SiteRecord>& sites,
                             const std::function<SiteTask(const SiteRecord&)>& make_task) {
    StageResult result;
    result.stage = stage;
    result.sites.resize(sites.size());
    std::atomic<bool> abort{false};
    parallel_for(sites.size(), cfg.workers, [&](std::size_t i) {
        auto& o = result.sites[i];
        o.site_id = sites[i].site_id;
        if (abort) return;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto task = make_task(sites[i]);
            std::string key_text = to_string(stage) + "|" + cfg.canonical();
            for (const auto& [name, path] : task.inputs) {
                if (!fs::exists(path)) throw DataError("missing prerequisite " + name + ": " + path.string());
                const auto h = file_hash(path);
                o.input_hashes[name] = h;
                key_text += "|" + name + "=" + h;
            }
            const auto key = hex64(fnv1a(key_text));
            const auto dir = layout.site_dir(stage, sites[i].site_id);
            if (detail::resume_ok(dir, key)) {
                o.status = SiteOutcome::Status::skipped;
            } else {
                const auto outputs = task.produce();
                std::string key_file = key + "\n";
                for (const auto& [name, bytes] : outputs) {
                    write_file_atomic(dir / name, std::string_view(bytes));
                    key_file += name + "\n";
                }
                detail::remove_stale(dir, outputs);
                write_file_atomic(dir / ".key", key_file);
                o.status = SiteOutcome::Status::ok;
            }
        } catch (const std::exception& e) {
            o.status = SiteOutcome::Status::failed;
            o.error = e.what();
            if (cfg.strict) abort = true;
        }
        o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    const bool any_failed = result.count(SiteOutcome::Status::failed) > 0;
    result.exit_code = !any_failed ? kExitOk : cfg.strict ? kExitData : kExitPartial;
    return result;
}

inline bool site_succeeded(const SiteOutcome& o) {
    return o.status == SiteOutcome::Status::ok || o.status == SiteOutcome::Status::skipped;
}

/// Sites that completed in `r`, in manifest order.
inline std::vector<SiteRecord> completed_sites(const StageResult& r, const std::vector<SiteRecord>& sites) {
    std::vector<SiteRecord> out;
    for (std::size_t i = 0; i < sites.size(); ++i)
        if (site_succeeded(r.sites[i])) out.push_back(sites[i]);
    return out;
}

inline std::vector<SiteRecord> sites_with_reference(const std::vector<SiteRecord>& sites) {
    std::vector<SiteRecord> out;
    for (const auto& s : sites)
        if (s.reference_path) out.push_back(s);
    return out;
}

inline StageResult run_segment(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& sites) {
    return run_sites(Stage::segment, cfg, layout, sites, [&](const SiteRecord& s) {
        SiteTask t;
        t.inputs = {{"raster", s.raster_path}};
        t.produce = [&cfg, s]() -> std::map<std::string, std::string> {
            const auto raster = read_raster(s.raster_path);
            const auto map = watershed_segment(raster, cfg.segmentation);
            return {{"instances.tif", detail::bytes_of(encode_label_grid(map.labels, map.transform))},
                    {"instances.geojson", instances_geojson(map)}};
        };
        return t;
    });
}

inline StageResult run_score(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& sites) {
    return run_sites(Stage::score, cfg, layout, sites, [&](const SiteRecord& s) {
        SiteTask t;
        const auto inst = layout.instances(s.site_id);
        t.inputs = {{"raster", s.raster_path}, {"instances", inst}};
        t.produce = [s, inst]() -> std::map<std::string, std::string> {
            const auto raster = read_raster(s.raster_path);
            const auto map = load_instances(inst);
            if (map.transform != raster.transform || map.width() != raster.width() || map.height() != raster.height()) {
                throw DataError("site " + s.site_id + ": instance grid does not match the raster");
            }
            return {{"scores.csv", score_table_csv(s.site_id, score_instances(map, raster))}};
        };
        return t;
    });
}

inline std::vector<SelectionStrategy> selection_strategies(const PipelineConfig& cfg) {
    std::vector<SelectionStrategy> out;
    for (const auto& id : cfg.strategy_ids())
        if (id != "human") out.push_back(parse_strategy(id));
    return out;
}

inline StageResult run_select(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& sites) {
    const auto strategies = selection_strategies(cfg);
    return run_sites(Stage::select, cfg, layout, sites, [&](const SiteRecord& s) {
        SiteTask t;
        const auto inst = layout.instances(s.site_id);
        const auto sc = layout.scores(s.site_id);
        t.inputs = {{"instances", inst}, {"scores", sc}};
        t.produce = [s, inst, sc, &strategies]() -> std::map<std::string, std::string> {
            const auto map = load_instances(inst);
            const auto scores = parse_score_table(read_text_file(sc));
            std::map<std::string, std::string> out;
            for (const auto& st : strategies) {
                const auto sel = select_site(scores, st);
                out[st.id() + ".geojson"] = dump_label_set(build_pseudo_labels(s.site_id, map, scores, sel, st.id()));
                out[st.id() + ".csv"] = selection_table_csv(s.site_id, scores, sel);
            }
            return out;
        };
        return t;
    });
}

inline std::string split_json(const SiteSplit& split) {
    nlohmann::ordered_json j;
    j["train"] = split.train;
    j["validation"] = split.validation;
    return j.dump(1) + "\n";
}

/// Label rasters for every non-test site. Sites are assigned to train/validation by split_sites
/// under the configured seed; label sources are the configured strategies plus, when listed,
/// "human" (the site's reference file).
inline StageResult run_labels(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& sites) {
    std::vector<SiteRecord> pool;
    for (const auto& s : sites)
        if (s.split != Split::test) pool.push_back(s);
    StageResult empty;
    empty.stage = Stage::labels;
    if (pool.empty()) return empty;
    std::vector<std::string> ids;
    for (const auto& s : pool) ids.push_back(s.site_id);
    const auto split = split_sites(ids, cfg.train_fraction, cfg.seed);
    write_file_atomic(layout.stage_dir(Stage::labels) / "split.json", split_json(split));
    std::map<std::string, std::string> assigned;
    for (const auto& id : split.train) assigned[id] = "train";
    for (const auto& id : split.validation) assigned[id] = "validation";

    const auto strategies = selection_strategies(cfg);
    const auto ids_cfg = cfg.strategy_ids();
    const bool with_human = std::find(ids_cfg.begin(), ids_cfg.end(), "human") != ids_cfg.end();
    return run_sites(Stage::labels, cfg, layout, pool, [&](const SiteRecord& s) {
        SiteTask t;
        t.inputs = {{"raster", s.raster_path}};
        std::vector<std::pair<std::string, fs::path>> sources;
        for (const auto& st : strategies) sources.emplace_back(st.id(), layout.selection(s.site_id, st.id()));
        if (with_human && s.reference_path) sources.emplace_back("human", *s.reference_path);
        for (const auto& src : sources) t.inputs.push_back(src);
        t.produce = [s, sources, split_name = assigned.at(s.site_id)]() -> std::map<std::string, std::string> {
            const auto raster = read_raster(s.raster_path);
            std::map<std::string, std::string> out;
            for (const auto& [name, path] : sources) {
                const auto labels = name == "human" ? load_reference(s, raster.transform.crs_id)
                                                    : label_set_from_features(read_geojson(path), s.site_id);
                out.merge(label_chip_artifacts(s.site_id, name, split_name, labels, raster.width(), raster.height(),
                                               raster.transform));
            }
            return out;
        };
        return t;
    });
}

inline StageResult run_eval_object(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& all) {
    const auto sites = sites_with_reference(all);
    auto r = run_sites(Stage::eval_object, cfg, layout, sites, [&](const SiteRecord& s) {
        SiteTask t;
        const auto inst = layout.instances(s.site_id);
        t.inputs = {{"instances", inst}, {"reference", *s.reference_path}};
        t.produce = [s, inst]() -> std::map<std::string, std::string> {
            const auto map = load_instances(inst);
            const auto refs = load_reference(s, map.transform.crs_id);
            return {{"matches.csv", match_table_csv(match_site(s, map, refs))}};
        };
        return t;
    });
    if (r.exit_code == kExitData) return r;
    std::vector<FieldMatch> matches;
    for (const auto& s : completed_sites(r, sites)) {
        auto m = parse_match_table(read_text_file(layout.matches(s.site_id)));
        matches.insert(matches.end(), m.begin(), m.end());
    }
    write_file_atomic(layout.stage_dir(Stage::eval_object) / "report.txt", object_report(matches));
    return r;
}

inline StageResult run_eval_site(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& all) {
    const auto sites = sites_with_reference(all);
    auto r = run_sites(Stage::eval_site, cfg, layout, sites, [&](const SiteRecord& s) {
        SiteTask t;
        const auto mpath = layout.matches(s.site_id);
        t.inputs = {{"raster", s.raster_path}, {"reference", *s.reference_path}, {"matches", mpath}};
        t.produce = [s, mpath, t_ext = cfg.segmentation.t_ext]() -> std::map<std::string, std::string> {
            const auto raster = read_raster(s.raster_path);
            const auto refs = load_reference(s, raster.transform.crs_id);
            const auto matches = parse_match_table(read_text_file(mpath));
            const auto rec = evaluate_site(s, raster, refs, matches, t_ext);
            return {{"site.csv", kSiteEvalHeader + "\n" + site_eval_row(rec)}};
        };
        return t;
    });
    if (r.exit_code == kExitData) return r;
    std::vector<SiteEvalRecord> records;
    std::vector<FieldMatch> matches;
    for (const auto& s : completed_sites(r, sites)) {
        auto rec = parse_site_eval_csv(read_text_file(layout.site_eval(s.site_id)));
        records.insert(records.end(), rec.begin(), rec.end());
        auto m = parse_match_table(read_text_file(layout.matches(s.site_id)));
        matches.insert(matches.end(), m.begin(), m.end());
    }
    write_file_atomic(layout.stage_dir(Stage::eval_site) / "sites.csv", site_eval_csv(records));
    SiteReportOptions opt;
    opt.seed = cfg.seed;
    write_file_atomic(layout.stage_dir(Stage::eval_site) / "report.txt", site_report(records, matches, opt));
    return r;
}

/// Label-set statistics table with one column per label source: "human" (reference files of all
/// sites that have one) and each configured strategy's selections.
inline StageResult run_summarize(const PipelineConfig& cfg, const Layout& layout, const std::vector<SiteRecord>& sites) {
    StageResult r;
    r.stage = Stage::summarize;
    std::vector<std::string> sources;
    if (!sites_with_reference(sites).empty()) sources.push_back("human");
    for (const auto& st : selection_strategies(cfg)) sources.push_back(st.id());
    std::vector<std::pair<std::string, LabelSetSummary>> columns;
    for (const auto& src : sources) {
        SiteOutcome o;
        o.site_id = src;  // one ledger entry per column
        const auto t0 = std::chrono::steady_clock::now();
        try {
            std::vector<LabelSet> sets;
            for (const auto& s : sites) {
                if (src == "human") {
                    if (s.reference_path) sets.push_back(label_set_from_features(read_geojson(*s.reference_path), s.site_id));
                } else {
                    const auto p = layout.selection(s.site_id, src);
                    if (!fs::exists(p)) throw DataError("missing prerequisite selection: " + p.string());
                    sets.push_back(label_set_from_features(read_geojson(p), s.site_id));
                }
            }
            columns.emplace_back(src, summarize_label_set(sets));
            o.status = SiteOutcome::Status::ok;
        } catch (const std::exception& e) {
            o.status = SiteOutcome::Status::failed;
            o.error = e.what();
        }
        o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.sites.push_back(std::move(o));
        if (cfg.strict && r.sites.back().status == SiteOutcome::Status::failed) break;
    }
    const bool failed = r.count(SiteOutcome::Status::failed) > 0;
    r.exit_code = !failed ? kExitOk : cfg.strict ? kExitData : kExitPartial;
    if (r.exit_code != kExitData && !columns.empty()) {
        write_file_atomic(layout.stage_dir(Stage::summarize) / "summary.tsv", render_summary_table(columns));
    }
    return r;
}

/// Runs one stage over the configured manifest and writes <out>/<stage>/ledger.json.
/// Usage errors propagate as UsageError; unreadable manifests as DataError.
inline StageResult run_stage(Stage stage, const PipelineConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto sites = read_manifest(cfg.manifest_path);
    const Layout layout{cfg.output_dir};
    StageResult r;
    try {
        switch (stage) {
            case Stage::segment: r = run_segment(cfg, layout, sites); break;
            case Stage::score: r = run_score(cfg, layout, sites); break;
            case Stage::select: r = run_select(cfg, layout, sites); break;
            case Stage::labels: r = run_labels(cfg, layout, sites); break;
            case Stage::eval_object: r = run_eval_object(cfg, layout, sites); break;
            case Stage::eval_site: r = run_eval_site(cfg, layout, sites); break;
            case Stage::summarize: r = run_summarize(cfg, layout, sites); break;
        }
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        r.stage = stage;
        r.global_error = e.what();
        r.exit_code = kExitData;
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomic(layout.stage_dir(stage) / "ledger.json", detail::ledger_json(r, cfg, total).dump(1) + "\n");
    return r;
}

}  // namespace fieldlabel::pipeline
