#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldlabel/grid.hpp"
#include "fieldlabel/scoring.hpp"

namespace fieldlabel {

/// Percentile with linear interpolation between the closest order statistics (rank = j/100 * (n-1)).
inline double site_percentile(std::span<const double> scores, double j) {
    if (scores.empty()) throw DataError("percentile of empty score set");
    if (!(j > 0.0 && j < 100.0)) throw UsageError("percentile must lie in (0,100)");
    std::vector<double> v(scores.begin(), scores.end());
    std::sort(v.begin(), v.end());
    const double rank = j / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

enum class StrategyKind { absolute, adaptive_sem, adaptive_sem_size, adaptive_sem_ins };
enum class NegativeRule { absolute_075, adaptive_p10, adaptive_p25_both };

inline constexpr double kNoncropAbsoluteThreshold = 0.75;
inline constexpr long long kDefaultMinSizePx = 500;  // 180 m^2 at 0.6 m

struct SelectionStrategy {
    StrategyKind kind = StrategyKind::absolute;
    std::optional<double> t_semc;   // absolute only
    std::optional<double> j;        // adaptive only
    std::optional<long long> t_size;  // adaptive_sem_size only
    NegativeRule negative_rule = NegativeRule::absolute_075;

    void validate() const {
        const bool absolute = kind == StrategyKind::absolute;
        if (absolute != t_semc.has_value() || absolute == j.has_value() ||
            (kind == StrategyKind::adaptive_sem_size) != t_size.has_value()) {
            throw UsageError("selection strategy fields do not match its kind");
        }
        if (t_semc && !(*t_semc >= 0.0 && *t_semc <= 1.0)) throw UsageError("T_SemC must lie in [0,1]");
        // Keeps field and non-cropland selections disjoint under the absolute rule.
        if (t_semc && *t_semc < kNoncropAbsoluteThreshold) throw UsageError("T_SemC must not be below 0.75");
        if (j && !(*j > 0.0 && *j < 100.0)) throw UsageError("percentile must lie in (0,100)");
        if (t_size && *t_size < 0) throw UsageError("minimum size must be non-negative");
    }

    /// Stable identifier recorded in label provenance, e.g. "abs_0.990", "p99_sem_size".
    std::string id() const {
        char buf[64];
        switch (kind) {
            case StrategyKind::absolute: std::snprintf(buf, sizeof buf, "abs_%.3f", *t_semc); return buf;
            case StrategyKind::adaptive_sem: std::snprintf(buf, sizeof buf, "p%g_sem", *j); return buf;
            case StrategyKind::adaptive_sem_size:
                if (*t_size == kDefaultMinSizePx) {
                    std::snprintf(buf, sizeof buf, "p%g_sem_size", *j);
                } else {
                    std::snprintf(buf, sizeof buf, "p%g_sem_size%lld", *j, *t_size);
                }
                return buf;
            case StrategyKind::adaptive_sem_ins: std::snprintf(buf, sizeof buf, "p%g_sem_ins", *j); return buf;
        }
        return {};
    }
};

inline SelectionStrategy absolute_strategy(double t_semc) {
    return {StrategyKind::absolute, t_semc, std::nullopt, std::nullopt, NegativeRule::absolute_075};
}
inline SelectionStrategy adaptive_sem_strategy(double j) {
    return {StrategyKind::adaptive_sem, std::nullopt, j, std::nullopt, NegativeRule::adaptive_p10};
}
inline SelectionStrategy adaptive_sem_size_strategy(double j, long long t_size = kDefaultMinSizePx) {
    return {StrategyKind::adaptive_sem_size, std::nullopt, j, t_size, NegativeRule::adaptive_p10};
}
inline SelectionStrategy adaptive_sem_ins_strategy(double j = 95) {
    return {StrategyKind::adaptive_sem_ins, std::nullopt, j, std::nullopt, NegativeRule::adaptive_p25_both};
}

/// The eight field-label strategies, each with its paired non-cropland rule.
inline std::vector<SelectionStrategy> standard_strategies() {
    return {absolute_strategy(0.925), absolute_strategy(0.950), absolute_strategy(0.975), absolute_strategy(0.990),
            adaptive_sem_strategy(99),    adaptive_sem_size_strategy(99), adaptive_sem_strategy(98),
            adaptive_sem_ins_strategy(95)};
}

inline std::string valid_strategy_ids() {
    std::string s;
    for (const auto& st : standard_strategies()) s += (s.empty() ? "" : ", ") + st.id();
    return s + " (or abs_<T>, p<j>_sem, p<j>_sem_size[<px>], p<j>_sem_ins)";
}

/// Parses a strategy id; throws UsageError naming the valid ids.
inline SelectionStrategy parse_strategy(const std::string& id) {
    auto fail = [&]() -> SelectionStrategy {
        throw UsageError("unknown strategy id '" + id + "'; valid ids: " + valid_strategy_ids());
    };
    auto parse_number = [&](const std::string& s) -> double {
        if (s.empty()) fail();
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (...) {
            fail();
        }
        if (used != s.size()) fail();
        return v;
    };
    SelectionStrategy st;
    if (id.rfind("abs_", 0) == 0) {
        st = absolute_strategy(parse_number(id.substr(4)));
    } else if (id.size() > 1 && id[0] == 'p') {
        const auto us = id.find('_');
        if (us == std::string::npos) fail();
        const double j = parse_number(id.substr(1, us - 1));
        const std::string rest = id.substr(us);
        if (rest == "_sem") {
            st = adaptive_sem_strategy(j);
        } else if (rest == "_sem_ins") {
            st = adaptive_sem_ins_strategy(j);
        } else if (rest.rfind("_sem_size", 0) == 0) {
            const std::string px = rest.substr(9);
            st = adaptive_sem_size_strategy(j, px.empty() ? kDefaultMinSizePx : static_cast<long long>(parse_number(px)));
        } else {
            fail();
        }
    } else {
        fail();
    }
    try {
        st.validate();
    } catch (const UsageError&) {
        fail();
    }
    return st;
}

/// Ids with SemC strictly above the absolute threshold.
inline std::vector<std::int32_t> select_absolute_fields(std::span<const InstanceScore> scores, double t_semc) {
    if (!(t_semc >= 0.0 && t_semc <= 1.0)) throw UsageError("T_SemC must lie in [0,1]");
    std::vector<std::int32_t> ids;
    for (const auto& s : scores)
        if (s.sem_c > t_semc) ids.push_back(s.instance_id);
    return ids;
}

namespace detail {
inline std::vector<double> sem_values(std::span<const InstanceScore> scores) {
    std::vector<double> v;
    for (const auto& s : scores) v.push_back(s.sem_c);
    return v;
}
inline std::vector<double> ins_values(std::span<const InstanceScore> scores) {
    std::vector<double> v;
    for (const auto& s : scores) v.push_back(s.ins_c);
    return v;
}
}  // namespace detail

/// Per-site percentile rules; `scores` must hold one site's instances.
inline std::vector<std::int32_t> select_adaptive_fields(std::span<const InstanceScore> scores, const SelectionStrategy& st) {
    st.validate();
    if (st.kind == StrategyKind::absolute) throw UsageError("select_adaptive_fields needs an adaptive strategy");
    std::vector<std::int32_t> ids;
    if (scores.empty()) return ids;
    const double sem_cut = site_percentile(detail::sem_values(scores), *st.j);
    const double ins_cut = st.kind == StrategyKind::adaptive_sem_ins ? site_percentile(detail::ins_values(scores), *st.j) : 0.0;
    for (const auto& s : scores) {
        bool keep = s.sem_c > sem_cut;
        if (st.kind == StrategyKind::adaptive_sem_size) keep = keep && s.size_px > *st.t_size;
        if (st.kind == StrategyKind::adaptive_sem_ins) keep = keep && s.ins_c > ins_cut;
        if (keep) ids.push_back(s.instance_id);
    }
    return ids;
}

inline std::vector<std::int32_t> select_fields(std::span<const InstanceScore> scores, const SelectionStrategy& st) {
    if (st.kind == StrategyKind::absolute) {
        st.validate();
        return select_absolute_fields(scores, *st.t_semc);
    }
    return select_adaptive_fields(scores, st);
}

/// Non-cropland candidates; no minimum-size filter.
inline std::vector<std::int32_t> select_noncrop(std::span<const InstanceScore> scores, const SelectionStrategy& st) {
    std::vector<std::int32_t> ids;
    if (scores.empty()) return ids;
    switch (st.negative_rule) {
        case NegativeRule::absolute_075:
            for (const auto& s : scores)
                if (s.sem_c < kNoncropAbsoluteThreshold) ids.push_back(s.instance_id);
            break;
        case NegativeRule::adaptive_p10: {
            const double cut = site_percentile(detail::sem_values(scores), 10);
            for (const auto& s : scores)
                if (s.sem_c < cut) ids.push_back(s.instance_id);
            break;
        }
        case NegativeRule::adaptive_p25_both: {
            const double sem_cut = site_percentile(detail::sem_values(scores), 25);
            const double ins_cut = site_percentile(detail::ins_values(scores), 25);
            for (const auto& s : scores)
                if (s.sem_c < sem_cut && s.ins_c < ins_cut) ids.push_back(s.instance_id);
            break;
        }
    }
    return ids;
}

struct SiteSelection {
    std::vector<std::int32_t> fields;
    std::vector<std::int32_t> noncrop;
};

inline SiteSelection select_site(std::span<const InstanceScore> scores, const SelectionStrategy& st) {
    return {select_fields(scores, st), select_noncrop(scores, st)};
}

}  // namespace fieldlabel
