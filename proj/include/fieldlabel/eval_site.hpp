#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fieldlabel/eval_object.hpp"
#include "fieldlabel/multitask.hpp"
#include "fieldlabel/scoring.hpp"

namespace fieldlabel {

struct SiteSizeErrors {
    std::string site_id;
    double rmse_ha = 0.0;
    double mae_ha = 0.0;
    double me_ha = 0.0;  // signed, predicted minus reference
    long long n_pairs = 0;
};

/// Error per reference = predicted area of its matched instance (0 if unmatched) - reference area.
inline SiteSizeErrors site_size_errors(std::span<const FieldMatch> matches, const std::string& site_id = {}) {
    if (matches.empty()) throw DataError("site_size_errors: site " + site_id + " has no reference fields");
    SiteSizeErrors e;
    e.site_id = site_id.empty() ? matches.front().site_id : site_id;
    double sq = 0.0, abs_sum = 0.0, sum = 0.0;
    for (const auto& m : matches) {
        const double err = (m.pred_id ? m.pred_area_ha : 0.0) - m.ref_area_ha;
        sq += err * err;
        abs_sum += std::abs(err);
        sum += err;
    }
    const auto n = static_cast<double>(matches.size());
    e.n_pairs = static_cast<long long>(matches.size());
    e.rmse_ha = std::sqrt(sq / n);
    e.mae_ha = abs_sum / n;
    e.me_ha = sum / n;
    return e;
}

struct FleetStats {
    double mRMSE = 0.0;
    double P50RMSE = 0.0;
    double mMAE = 0.0;
    double mME = 0.0;
    long long n_sites = 0;
};

/// Unweighted means (and the RMSE median) over sites.
inline FleetStats fleet_stats(std::span<const SiteSizeErrors> sites) {
    if (sites.empty()) throw DataError("fleet_stats: no sites");
    std::vector<double> rmse, mae, me;
    for (const auto& s : sites) {
        rmse.push_back(s.rmse_ha);
        mae.push_back(s.mae_ha);
        me.push_back(s.me_ha);
    }
    // Sorted sums keep the result independent of site order.
    std::sort(rmse.begin(), rmse.end());
    std::sort(mae.begin(), mae.end());
    std::sort(me.begin(), me.end());
    const auto n = static_cast<double>(sites.size());
    FleetStats f;
    f.n_sites = static_cast<long long>(sites.size());
    f.mRMSE = std::accumulate(rmse.begin(), rmse.end(), 0.0) / n;
    f.mMAE = std::accumulate(mae.begin(), mae.end(), 0.0) / n;
    f.mME = std::accumulate(me.begin(), me.end(), 0.0) / n;
    f.P50RMSE = median_inplace(rmse);
    return f;
}

struct RegressionFit {
    double r2 = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    long long n = 0;
};

/// OLS of predicted on observed; r2 is the squared Pearson correlation.
inline RegressionFit fit_regression(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) throw UsageError("fit_regression: length mismatch");
    if (observed.size() < 3) throw DataError("fit_regression: need at least 3 pairs");
    const auto n = static_cast<double>(observed.size());
    const double mx = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
    const double my = std::accumulate(predicted.begin(), predicted.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double dx = observed[i] - mx, dy = predicted[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0) throw DataError("fit_regression: observed values have zero variance");
    RegressionFit f;
    f.n = static_cast<long long>(observed.size());
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 0.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

struct SiteCoord {
    double x = 0.0;
    double y = 0.0;
};

struct MoranResult {
    double I = 0.0;
    double expected = 0.0;  // -1/(n-1)
    double p_value = 1.0;
    long long n = 0;
    int k = 0;
    double permutation_mean = 0.0;
    double permutation_sd = 0.0;
};

/// Row-standardized k-nearest-neighbour weights (ties by index); row i lists its neighbours.
inline std::vector<std::vector<int>> knn_neighbours(std::span<const SiteCoord> coords, int k) {
    const int n = static_cast<int>(coords.size());
    std::vector<std::vector<int>> nb(n);
    std::vector<std::pair<double, int>> d;
    for (int i = 0; i < n; ++i) {
        d.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = coords[i].x - coords[j].x, dy = coords[i].y - coords[j].y;
            d.emplace_back(dx * dx + dy * dy, j);
        }
        std::sort(d.begin(), d.end());
        for (int m = 0; m < k && m < static_cast<int>(d.size()); ++m) nb[i].push_back(d[m].second);
    }
    return nb;
}

/// I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2 for row-standardized weights.
inline double moran_statistic(std::span<const double> z, const std::vector<std::vector<int>>& nb) {
    const auto n = static_cast<double>(z.size());
    double num = 0.0, den = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        den += z[i] * z[i];
        if (nb[i].empty()) continue;
        const double w = 1.0 / static_cast<double>(nb[i].size());
        for (int j : nb[i]) {
            num += w * z[i] * z[j];
            s0 += w;
        }
    }
    return (n / s0) * num / den;
}

/// Global Moran's I with a two-sided permutation p-value (1 + #{|I_perm| >= |I_obs|}) / (1 + n_perm).
inline MoranResult morans_i(std::span<const double> values, std::span<const SiteCoord> coords, int k = 8,
                            int n_permutations = 999, std::uint64_t seed = 0) {
    if (values.size() != coords.size()) throw UsageError("morans_i: values and coordinates differ in length");
    if (values.size() < 4) throw DataError("morans_i: need at least 4 sites");
    if (k < 1 || n_permutations < 1) throw UsageError("morans_i: k and n_permutations must be positive");
    const auto n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    std::vector<double> z;
    z.reserve(values.size());
    double var = 0.0;
    for (double v : values) {
        z.push_back(v - mean);
        var += (v - mean) * (v - mean);
    }
    if (var == 0.0) throw DataError("morans_i: values have zero variance");

    MoranResult r;
    r.n = static_cast<long long>(values.size());
    r.k = std::min(k, static_cast<int>(values.size()) - 1);
    r.expected = -1.0 / (n - 1.0);
    const auto nb = knn_neighbours(coords, r.k);
    r.I = moran_statistic(z, nb);

    std::mt19937_64 rng(seed);
    std::vector<double> perm = z;
    long long extreme = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < n_permutations; ++p) {
        detail::shuffle(perm, rng);
        const double ip = moran_statistic(perm, nb);
        sum += ip;
        sum_sq += ip * ip;
        if (std::abs(ip) >= std::abs(r.I)) ++extreme;
    }
    r.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + n_permutations);
    r.permutation_mean = sum / n_permutations;
    r.permutation_sd = n_permutations > 1
                           ? std::sqrt(std::max(0.0, (sum_sq - n_permutations * r.permutation_mean * r.permutation_mean) / (n_permutations - 1)))
                           : 0.0;
    return r;
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

/// Welch's unequal-variance t-test, two-tailed.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("t-test: each sample needs at least 2 values");
    auto moments = [](std::span<const double> x) {
        const auto n = static_cast<double>(x.size());
        const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : x) ss += (v - m) * (v - m);
        return std::pair{m, ss / (n - 1.0)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    if (va == 0.0 && vb == 0.0) throw DataError("t-test: both samples are constant");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sa = va / na, sb = vb / nb;
    TTestResult r;
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    const boost::math::students_t dist(r.df);
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
    return r;
}

inline double two_tailed_t_test(std::span<const double> a, std::span<const double> b) { return welch_t_test(a, b).p_value; }

struct NonCropMetrics {
    double overall_accuracy = 0.0;
    double precision = 0.0;  // 0 when nothing is predicted as non-cropland
    double recall = 0.0;
    double f1 = 0.0;
    long long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Pixel-level metrics with non-cropland as the positive class, restricted to annotated reference
/// pixels: `ref_noncrop` patches are positives, `ref_cropland` pixels are negatives.
inline NonCropMetrics noncrop_pixel_metrics(const Mask& predicted_noncrop, const Mask& ref_noncrop, const Mask& ref_cropland) {
    if (!predicted_noncrop.same_shape(ref_noncrop) || !predicted_noncrop.same_shape(ref_cropland)) {
        throw UsageError("noncrop_pixel_metrics: masks differ in shape");
    }
    NonCropMetrics m;
    for (std::size_t i = 0; i < predicted_noncrop.size(); ++i) {
        const bool pos = ref_noncrop[i] != 0;
        const bool neg = !pos && ref_cropland[i] != 0;
        if (!pos && !neg) continue;
        const bool pred = predicted_noncrop[i] != 0;
        if (pos && pred) ++m.tp;
        else if (pos) ++m.fn;
        else if (pred) ++m.fp;
        else ++m.tn;
    }
    const long long total = m.tp + m.fp + m.fn + m.tn;
    if (total == 0) throw DataError("noncrop_pixel_metrics: empty reference");
    m.overall_accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

/// Unweighted mean of per-image metrics.
inline NonCropMetrics mean_noncrop_metrics(std::span<const NonCropMetrics> per_image) {
    if (per_image.empty()) throw DataError("mean_noncrop_metrics: no images");
    NonCropMetrics m;
    for (const auto& x : per_image) {
        m.overall_accuracy += x.overall_accuracy;
        m.precision += x.precision;
        m.recall += x.recall;
        m.f1 += x.f1;
        m.tp += x.tp;
        m.fp += x.fp;
        m.fn += x.fn;
        m.tn += x.tn;
    }
    const auto n = static_cast<double>(per_image.size());
    m.overall_accuracy /= n;
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    return m;
}

}  // namespace fieldlabel
