#pragma once

// Text serializations of stage artifacts. Every number in a machine-read table is written in
// shortest round-trip form so that a downstream stage reading it sees exactly the in-memory value.

#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fieldlabel/eval_object.hpp"
#include "fieldlabel/eval_site.hpp"
#include "fieldlabel/io.hpp"
#include "fieldlabel/manifest.hpp"
#include "fieldlabel/polygonize.hpp"
#include "fieldlabel/scoring.hpp"
#include "fieldlabel/selection.hpp"

namespace fieldlabel::pipeline {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

/// Rows of a CSV with a fixed header; the header must match exactly.
inline std::vector<std::vector<std::string>> read_csv(const std::string& text, const std::string& header,
                                                      const std::string& what) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) throw DataError(what + ": unexpected header");
    const auto n_cols = split_csv_line(header).size();
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != n_cols) throw DataError(what + ": malformed row '" + line + "'");
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline long long parse_int(const std::string& s, const std::string& what) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw DataError(what + ": not an integer: '" + s + "'");
    return v;
}

/// CSV cells here never contain commas; province names are sanitized rather than quoted.
inline std::string cell(std::string s) {
    for (auto& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace detail

/// One polygon feature per instance with instance_id, size_px and area_ha.
inline std::string instances_geojson(const InstanceMap& map) {
    FeatureCollection fc;
    fc.crs_id = map.transform.crs_id;
    const auto polygons = polygonize(map.labels, map.transform);
    for (const auto& inst : map.instances) {
        Feature f;
        f.geometry = polygons.at(inst.instance_id);
        f.properties["instance_id"] = inst.instance_id;
        f.properties["size_px"] = inst.size_px;
        f.properties["area_ha"] = inst.area_ha;
        fc.features.push_back(std::move(f));
    }
    return dump_geojson(fc);
}

inline const std::string kScoreHeader = "site_id,instance_id,SemC,InsC,size_px";
inline const std::string kSelectionHeader = "site_id,instance_id,SemC,InsC,size_px,selected_as";

inline std::string score_table_csv(const std::string& site_id, std::span<const InstanceScore> scores) {
    std::string out = kScoreHeader + "\n";
    for (const auto& s : scores) {
        out += detail::cell(site_id) + "," + std::to_string(s.instance_id) + "," + fmt_roundtrip(s.sem_c) + "," +
               fmt_roundtrip(s.ins_c) + "," + std::to_string(s.size_px) + "\n";
    }
    return out;
}

inline std::vector<InstanceScore> parse_score_table(const std::string& text) {
    std::vector<InstanceScore> out;
    for (const auto& row : detail::read_csv(text, kScoreHeader, "score table")) {
        out.push_back(InstanceScore{static_cast<std::int32_t>(detail::parse_int(row[1], "instance_id")), parse_double(row[2]),
                                    parse_double(row[3]), detail::parse_int(row[4], "size_px")});
    }
    return out;
}

/// Score table with each instance's role under one strategy: field, non_cropland or discard.
inline std::string selection_table_csv(const std::string& site_id, std::span<const InstanceScore> scores,
                                       const SiteSelection& sel) {
    std::map<std::int32_t, std::string> role;
    for (auto id : sel.fields) role[id] = "field";
    for (auto id : sel.noncrop) role[id] = "non_cropland";
    std::string out = kSelectionHeader + "\n";
    for (const auto& s : scores) {
        const auto it = role.find(s.instance_id);
        out += detail::cell(site_id) + "," + std::to_string(s.instance_id) + "," + fmt_roundtrip(s.sem_c) + "," +
               fmt_roundtrip(s.ins_c) + "," + std::to_string(s.size_px) + "," + (it == role.end() ? "discard" : it->second) +
               "\n";
    }
    return out;
}

inline const std::string kMatchHeader =
    "site_id,ref_id,pred_id,iou,precision,recall,dice,area_ha,pred_area_ha,season,province";

inline std::string match_table_csv(std::span<const FieldMatch> matches) {
    std::string out = kMatchHeader + "\n";
    for (const auto& m : matches) {
        out += detail::cell(m.site_id) + "," + detail::cell(m.ref_id) + "," + (m.pred_id ? std::to_string(*m.pred_id) : "") + "," +
               fmt_roundtrip(m.iou) + "," + fmt_roundtrip(m.precision) + "," + fmt_roundtrip(m.recall) + "," +
               fmt_roundtrip(m.dice) + "," + fmt_roundtrip(m.ref_area_ha) + "," + fmt_roundtrip(m.pred_area_ha) + "," +
               to_string(m.season) + "," + detail::cell(m.province) + "\n";
    }
    return out;
}

inline std::vector<FieldMatch> parse_match_table(const std::string& text) {
    std::vector<FieldMatch> out;
    for (const auto& row : detail::read_csv(text, kMatchHeader, "match table")) {
        FieldMatch m;
        m.site_id = row[0];
        m.ref_id = row[1];
        if (!row[2].empty()) m.pred_id = static_cast<std::int32_t>(detail::parse_int(row[2], "pred_id"));
        m.iou = parse_double(row[3]);
        m.precision = parse_double(row[4]);
        m.recall = parse_double(row[5]);
        m.dice = parse_double(row[6]);
        m.ref_area_ha = parse_double(row[7]);
        m.pred_area_ha = parse_double(row[8]);
        if (row[9] == "dry") m.season = Season::dry;
        else if (row[9] == "wet") m.season = Season::wet;
        else throw DataError("match table: bad season '" + row[9] + "'");
        m.province = row[10];
        out.push_back(std::move(m));
    }
    return out;
}

/// `key = value` lines with the AggregateScores field names.
inline std::string aggregate_lines(const AggregateScores& a, const std::string& prefix = {}) {
    std::string out;
    auto kv = [&](const char* k, const std::string& v) { out += prefix + k + " = " + v + "\n"; };
    kv("mIoU", fmt_roundtrip(a.mIoU));
    kv("medIoU", fmt_roundtrip(a.medIoU));
    kv("IoU50", fmt_roundtrip(a.IoU50));
    kv("IoU80", fmt_roundtrip(a.IoU80));
    kv("mean_dice", fmt_roundtrip(a.mean_dice));
    kv("mean_precision", fmt_roundtrip(a.mean_precision));
    kv("mean_recall", fmt_roundtrip(a.mean_recall));
    kv("n", std::to_string(a.n));
    return out;
}

/// Object-level report: overall aggregates, then one block per breakdown group.
inline std::string object_report(std::span<const FieldMatch> matches) {
    if (matches.empty()) return "n = 0\n";
    std::string out = aggregate_lines(aggregate(matches));
    for (auto key : {BreakdownKey::size_bins, BreakdownKey::season, BreakdownKey::province}) {
        const char* name = key == BreakdownKey::size_bins ? "size_bins" : key == BreakdownKey::season ? "season" : "province";
        for (const auto& [group, agg] : breakdown(matches, key)) {
            out += "\n[" + std::string(name) + ":" + group + "]\n";
            out += aggregate_lines(agg);
        }
    }
    return out;
}

/// Per-site record written by the eval-site stage.
struct SiteEvalRecord {
    std::string site_id;
    std::string province;
    Season season = Season::dry;
    SiteCoord centroid;
    std::optional<SiteSizeErrors> errors;
    double mean_ref_area_ha = 0.0;
    double mean_pred_area_ha = 0.0;
    std::optional<NonCropMetrics> noncrop;
};

inline const std::string kSiteEvalHeader =
    "site_id,province,season,centroid_x,centroid_y,rmse,mae,me,n_pairs,mean_ref_area_ha,mean_pred_area_ha,"
    "noncrop_oa,noncrop_precision,noncrop_recall,noncrop_f1,noncrop_tp,noncrop_fp,noncrop_fn,noncrop_tn";

inline std::string site_eval_row(const SiteEvalRecord& r) {
    std::string out = detail::cell(r.site_id) + "," + detail::cell(r.province) + "," + to_string(r.season) + "," +
                      fmt_roundtrip(r.centroid.x) + "," + fmt_roundtrip(r.centroid.y) + ",";
    if (r.errors) {
        out += fmt_roundtrip(r.errors->rmse_ha) + "," + fmt_roundtrip(r.errors->mae_ha) + "," + fmt_roundtrip(r.errors->me_ha) +
               "," + std::to_string(r.errors->n_pairs) + "," + fmt_roundtrip(r.mean_ref_area_ha) + "," +
               fmt_roundtrip(r.mean_pred_area_ha) + ",";
    } else {
        out += ",,,,,,";
    }
    if (r.noncrop) {
        const auto& m = *r.noncrop;
        out += fmt_roundtrip(m.overall_accuracy) + "," + fmt_roundtrip(m.precision) + "," + fmt_roundtrip(m.recall) + "," +
               fmt_roundtrip(m.f1) + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," + std::to_string(m.fn) + "," +
               std::to_string(m.tn);
    } else {
        out += ",,,,,,,";
    }
    return out + "\n";
}

inline std::string site_eval_csv(std::span<const SiteEvalRecord> records) {
    std::string out = kSiteEvalHeader + "\n";
    for (const auto& r : records) out += site_eval_row(r);
    return out;
}

inline std::vector<SiteEvalRecord> parse_site_eval_csv(const std::string& text) {
    std::vector<SiteEvalRecord> out;
    for (const auto& row : detail::read_csv(text, kSiteEvalHeader, "site evaluation table")) {
        SiteEvalRecord r;
        r.site_id = row[0];
        r.province = row[1];
        r.season = row[2] == "dry" ? Season::dry : Season::wet;
        r.centroid = {parse_double(row[3]), parse_double(row[4])};
        if (!row[5].empty()) {
            SiteSizeErrors e;
            e.site_id = r.site_id;
            e.rmse_ha = parse_double(row[5]);
            e.mae_ha = parse_double(row[6]);
            e.me_ha = parse_double(row[7]);
            e.n_pairs = detail::parse_int(row[8], "n_pairs");
            r.errors = e;
            r.mean_ref_area_ha = parse_double(row[9]);
            r.mean_pred_area_ha = parse_double(row[10]);
        }
        if (!row[11].empty()) {
            NonCropMetrics m;
            m.overall_accuracy = parse_double(row[11]);
            m.precision = parse_double(row[12]);
            m.recall = parse_double(row[13]);
            m.f1 = parse_double(row[14]);
            m.tp = detail::parse_int(row[15], "tp");
            m.fp = detail::parse_int(row[16], "fp");
            m.fn = detail::parse_int(row[17], "fn");
            m.tn = detail::parse_int(row[18], "tn");
            r.noncrop = m;
        }
        out.push_back(std::move(r));
    }
    return out;
}

struct SiteReportOptions {
    int moran_k = 8;
    int moran_permutations = 999;
    std::uint64_t seed = 0;
};

/// Site-level report over all evaluated sites. Diagnostics that cannot be computed on the given
/// sites (too few, zero variance) are reported as `NA` with the reason, never silently dropped.
inline std::string site_report(std::span<const SiteEvalRecord> records, std::span<const FieldMatch> all_matches,
                               const SiteReportOptions& opt = {}) {
    std::string out;
    auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    auto na = [&](const std::string& k, const std::exception& e) { kv(k, std::string("NA (") + e.what() + ")"); };

    std::vector<SiteSizeErrors> errs;
    std::vector<double> obs_site, pred_site, site_rmse;
    std::vector<SiteCoord> coords;
    std::vector<double> dry, wet;
    std::vector<NonCropMetrics> noncrop;
    for (const auto& r : records) {
        if (r.noncrop) noncrop.push_back(*r.noncrop);
        if (!r.errors) continue;
        errs.push_back(*r.errors);
        obs_site.push_back(r.mean_ref_area_ha);
        pred_site.push_back(r.mean_pred_area_ha);
        site_rmse.push_back(r.errors->rmse_ha);
        coords.push_back(r.centroid);
        (r.season == Season::dry ? dry : wet).push_back(r.errors->rmse_ha);
    }

    kv("n_sites", std::to_string(errs.size()));
    if (!errs.empty()) {
        const auto f = fleet_stats(errs);
        kv("mRMSE", fmt_roundtrip(f.mRMSE));
        kv("P50RMSE", fmt_roundtrip(f.P50RMSE));
        kv("mMAE", fmt_roundtrip(f.mMAE));
        kv("mME", fmt_roundtrip(f.mME));
    }

    auto regression = [&](const std::string& prefix, std::span<const double> o, std::span<const double> p) {
        try {
            const auto fit = fit_regression(o, p);
            kv(prefix + "r2", fmt_roundtrip(fit.r2));
            kv(prefix + "slope", fmt_roundtrip(fit.slope));
            kv(prefix + "intercept", fmt_roundtrip(fit.intercept));
            kv(prefix + "n", std::to_string(fit.n));
        } catch (const std::exception& e) {
            na(prefix + "r2", e);
        }
    };
    // Site-level: mean reference vs mean predicted field size per site.
    regression("", obs_site, pred_site);
    // Pooled: every reference field against its matched prediction (0 when unmatched).
    std::vector<double> obs_field, pred_field;
    for (const auto& m : all_matches) {
        obs_field.push_back(m.ref_area_ha);
        pred_field.push_back(m.pred_id ? m.pred_area_ha : 0.0);
    }
    regression("pooled_", obs_field, pred_field);

    try {
        const auto mr = morans_i(site_rmse, coords, opt.moran_k, opt.moran_permutations, opt.seed);
        kv("moran_I", fmt_roundtrip(mr.I));
        kv("moran_expected", fmt_roundtrip(mr.expected));
        kv("moran_p", fmt_roundtrip(mr.p_value));
        kv("moran_k", std::to_string(mr.k));
    } catch (const std::exception& e) {
        na("moran_I", e);
    }

    try {
        const auto t = welch_t_test(dry, wet);
        kv("season_t", fmt_roundtrip(t.t));
        kv("season_df", fmt_roundtrip(t.df));
        kv("season_p", fmt_roundtrip(t.p_value));
    } catch (const std::exception& e) {
        na("season_p", e);
    }
    kv("n_dry", std::to_string(dry.size()));
    kv("n_wet", std::to_string(wet.size()));

    if (!noncrop.empty()) {
        const auto m = mean_noncrop_metrics(noncrop);
        kv("noncrop_n_images", std::to_string(noncrop.size()));
        kv("noncrop_oa", fmt_roundtrip(m.overall_accuracy));
        kv("noncrop_precision", fmt_roundtrip(m.precision));
        kv("noncrop_recall", fmt_roundtrip(m.recall));
        kv("noncrop_f1", fmt_roundtrip(m.f1));
    }

    // Per-group tables of site-level size errors.
    std::map<std::string, std::vector<SiteSizeErrors>> by_season, by_province;
    for (const auto& r : records) {
        if (!r.errors) continue;
        by_season[to_string(r.season)].push_back(*r.errors);
        by_province[r.province].push_back(*r.errors);
    }
    auto groups = [&](const char* name, const std::map<std::string, std::vector<SiteSizeErrors>>& g) {
        for (const auto& [key, list] : g) {
            const auto f = fleet_stats(list);
            out += "\n[" + std::string(name) + ":" + key + "]\n";
            kv("mRMSE", fmt_roundtrip(f.mRMSE));
            kv("P50RMSE", fmt_roundtrip(f.P50RMSE));
            kv("mMAE", fmt_roundtrip(f.mMAE));
            kv("mME", fmt_roundtrip(f.mME));
            kv("n_sites", std::to_string(f.n_sites));
        }
    };
    groups("season", by_season);
    groups("province", by_province);
    return out;
}

}  // namespace fieldlabel::pipeline
