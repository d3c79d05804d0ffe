#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldlabel/labelset.hpp"
#include "fieldlabel/rasterize.hpp"
#include "fieldlabel/scoring.hpp"
#include "fieldlabel/segmentation.hpp"

namespace fieldlabel {

enum class Season { dry, wet };

inline std::string to_string(Season s) { return s == Season::dry ? "dry" : "wet"; }

/// June through November is the dry season, December through May the wet season.
inline Season season_of_month(int month) {
    if (month < 1 || month > 12) throw UsageError("month must be 1..12");
    return (month >= 6 && month <= 11) ? Season::dry : Season::wet;
}

struct PairScores {
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double dice = 0.0;
};

/// Scores from set sizes and their intersection.
inline PairScores pair_scores_from_counts(long long intersection, long long n_pred, long long n_ref) {
    if (n_pred <= 0 || n_ref <= 0) throw DataError("pair_scores: empty pixel set");
    if (intersection < 0 || intersection > std::min(n_pred, n_ref)) throw UsageError("pair_scores: inconsistent counts");
    const auto i = static_cast<double>(intersection);
    PairScores s;
    s.iou = i / static_cast<double>(n_pred + n_ref - intersection);
    s.precision = i / static_cast<double>(n_pred);
    s.recall = i / static_cast<double>(n_ref);
    s.dice = 2.0 * i / static_cast<double>(n_pred + n_ref);
    return s;
}

inline PairScores pair_scores(std::vector<Pixel> pred, std::vector<Pixel> ref) {
    std::sort(pred.begin(), pred.end());
    pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
    std::sort(ref.begin(), ref.end());
    ref.erase(std::unique(ref.begin(), ref.end()), ref.end());
    std::vector<Pixel> common;
    std::set_intersection(pred.begin(), pred.end(), ref.begin(), ref.end(), std::back_inserter(common));
    return pair_scores_from_counts(static_cast<long long>(common.size()), static_cast<long long>(pred.size()),
                                   static_cast<long long>(ref.size()));
}

struct FieldMatch {
    std::string site_id;
    std::string ref_id;
    std::optional<std::int32_t> pred_id;
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double dice = 0.0;
    double ref_area_ha = 0.0;
    double pred_area_ha = 0.0;  // 0 when unmatched
    Season season = Season::dry;
    std::string province;
};

struct MatchContext {
    std::string site_id;
    Season season = Season::dry;
    std::string province;
};

/// Pixel set of a reference polygon; a polygon too small to cover any pixel centre is represented
/// by the pixel holding its centroid.
inline std::vector<Pixel> reference_pixels(const MultiPolygon& geometry, const GeoTransform& t, int width, int height) {
    auto px = rasterize_polygon(geometry, t, width, height);
    if (px.empty()) {
        const auto [x, y] = centroid(geometry);
        const auto [c, r] = t.to_pixel(x, y);
        const Pixel p{static_cast<int>(std::floor(r)), static_cast<int>(std::floor(c))};
        if (p.row >= 0 && p.col >= 0 && p.row < height && p.col < width) px.push_back(p);
    }
    return px;
}

/// Matches each reference field to the predicted instance containing the reference centroid.
inline std::vector<FieldMatch> match_by_centroid(const InstanceMap& pred, const LabelSet& refs, const MatchContext& ctx = {}) {
    std::vector<FieldMatch> out;
    const int w = pred.width(), h = pred.height();
    for (const auto& ref : refs.labels) {
        if (ref.label_class != LabelClass::field) continue;
        FieldMatch m;
        m.site_id = ctx.site_id.empty() ? refs.site_id : ctx.site_id;
        m.ref_id = ref.ref_id;
        m.ref_area_ha = ref.area_ha;
        m.season = ctx.season;
        m.province = ctx.province;
        const auto [cx, cy] = centroid(ref.geometry);
        const auto [fc, fr] = pred.transform.to_pixel(cx, cy);
        const int r = static_cast<int>(std::floor(fr)), c = static_cast<int>(std::floor(fc));
        if (r < 0 || c < 0 || r >= h || c >= w) {
            throw DataError("site " + m.site_id + ": centroid of reference " + m.ref_id + " lies outside the raster");
        }
        const auto id = pred.labels(r, c);
        if (id > 0) {
            const auto& inst = pred.instances.at(static_cast<std::size_t>(id - 1));
            const auto ref_px = reference_pixels(ref.geometry, pred.transform, w, h);
            long long inter = 0;
            for (const auto& p : ref_px) inter += pred.labels(p.row, p.col) == id ? 1 : 0;
            const auto s = pair_scores_from_counts(inter, inst.size_px, static_cast<long long>(ref_px.size()));
            m.pred_id = id;
            m.iou = s.iou;
            m.precision = s.precision;
            m.recall = s.recall;
            m.dice = s.dice;
            m.pred_area_ha = inst.area_ha;
        }
        out.push_back(std::move(m));
    }
    return out;
}

struct AggregateScores {
    double mIoU = 0.0;
    double medIoU = 0.0;
    double IoU50 = 0.0;
    double IoU80 = 0.0;
    double mean_dice = 0.0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    long long n = 0;
};

/// Unmatched references contribute zeros to every mean.
inline AggregateScores aggregate(std::span<const FieldMatch> matches) {
    if (matches.empty()) throw DataError("aggregate: no matches");
    AggregateScores a;
    a.n = static_cast<long long>(matches.size());
    std::vector<double> ious;
    ious.reserve(matches.size());
    long long above50 = 0, above80 = 0;
    for (const auto& m : matches) {
        ious.push_back(m.iou);
        a.mIoU += m.iou;
        a.mean_dice += m.dice;
        a.mean_precision += m.precision;
        a.mean_recall += m.recall;
        above50 += m.iou > 0.5 ? 1 : 0;
        above80 += m.iou > 0.8 ? 1 : 0;
    }
    const auto n = static_cast<double>(a.n);
    a.mIoU /= n;
    a.mean_dice /= n;
    a.mean_precision /= n;
    a.mean_recall /= n;
    a.IoU50 = static_cast<double>(above50) / n;
    a.IoU80 = static_cast<double>(above80) / n;
    a.medIoU = median_inplace(ious);
    return a;
}

enum class BreakdownKey { size_bins, season, province };

inline BreakdownKey parse_breakdown_key(const std::string& s) {
    if (s == "size_bins") return BreakdownKey::size_bins;
    if (s == "season") return BreakdownKey::season;
    if (s == "province") return BreakdownKey::province;
    throw UsageError("unknown grouping key '" + s + "' (expected size_bins, season or province)");
}

/// Decade-spaced reference-area bins over [0.001, 1.4] ha; values outside fall into the end bins.
inline std::string size_bin(double area_ha) {
    if (area_ha < 0.01) return "0.001-0.01ha";
    if (area_ha < 0.1) return "0.01-0.1ha";
    if (area_ha < 1.0) return "0.1-1ha";
    return "1-1.4ha";
}

inline std::map<std::string, AggregateScores> breakdown(std::span<const FieldMatch> matches, BreakdownKey key) {
    std::map<std::string, std::vector<FieldMatch>> groups;
    for (const auto& m : matches) {
        std::string g;
        switch (key) {
            case BreakdownKey::size_bins: g = size_bin(m.ref_area_ha); break;
            case BreakdownKey::season: g = to_string(m.season); break;
            case BreakdownKey::province: g = m.province; break;
        }
        groups[g].push_back(m);
    }
    std::map<std::string, AggregateScores> out;
    for (const auto& [g, ms] : groups) out[g] = aggregate(ms);
    return out;
}

struct GainTriple {
    double score_pseudo = 0.0;
    double score_baseline = 0.0;
    double score_human = 0.0;
};

/// Share of the human-label improvement over the baseline achieved with pseudo labels, in percent.
inline double relative_gain(const GainTriple& g) {
    if (!std::isfinite(g.score_pseudo) || !std::isfinite(g.score_baseline) || !std::isfinite(g.score_human)) {
        throw DataError("relative_gain: non-finite score");
    }
    const double denom = g.score_human - g.score_baseline;
    if (denom == 0.0) throw DataError("relative_gain: human and baseline scores are equal");
    return (g.score_pseudo - g.score_baseline) / denom * 100.0;
}

}  // namespace fieldlabel
