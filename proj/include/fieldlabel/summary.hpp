#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fieldlabel/io.hpp"
#include "fieldlabel/labelset.hpp"
#include "fieldlabel/scoring.hpp"

namespace fieldlabel {

/// Descriptive statistics of a label collection (field class only).
struct LabelSetSummary {
    long long total_n_fields = 0;
    double mean_n_per_site = 0.0;
    long long max_n_per_site = 0;
    long long n_sites_ge5 = 0;
    long long n_sites_0 = 0;
    double mean_ha = 0.0;
    double median_ha = 0.0;
    double sd_ha = 0.0;  // sample standard deviation; 0 for fewer than two fields
    long long n_sites = 0;
};

inline LabelSetSummary summarize_label_set(std::span<const LabelSet> sets) {
    if (sets.empty()) throw DataError("summarize_label_set: no sites");
    LabelSetSummary s;
    s.n_sites = static_cast<long long>(sets.size());
    std::vector<double> areas;
    for (const auto& set : sets) {
        long long n = 0;
        for (const auto& l : set.labels) {
            if (l.label_class != LabelClass::field) continue;
            ++n;
            areas.push_back(l.area_ha);
        }
        s.total_n_fields += n;
        s.max_n_per_site = std::max(s.max_n_per_site, n);
        if (n >= 5) ++s.n_sites_ge5;
        if (n == 0) ++s.n_sites_0;
    }
    s.mean_n_per_site = static_cast<double>(s.total_n_fields) / static_cast<double>(s.n_sites);
    if (areas.empty()) return s;
    // Sorted so the result does not depend on site order.
    std::sort(areas.begin(), areas.end());
    double sum = 0.0;
    for (double a : areas) sum += a;
    s.mean_ha = sum / static_cast<double>(areas.size());
    s.median_ha = median_inplace(areas);
    if (areas.size() > 1) {
        double ss = 0.0;
        for (double a : areas) ss += (a - s.mean_ha) * (a - s.mean_ha);
        s.sd_ha = std::sqrt(ss / static_cast<double>(areas.size() - 1));
    }
    return s;
}

/// One tab-separated row per statistic, one column per label collection.
inline std::string render_summary_table(const std::vector<std::pair<std::string, LabelSetSummary>>& columns) {
    std::string out = "statistic";
    for (const auto& [name, _] : columns) out += "\t" + name;
    out += "\n";
    auto row = [&](const char* name, auto getter) {
        out += name;
        for (const auto& [_, s] : columns) out += "\t" + getter(s);
        out += "\n";
    };
    row("total_n_fields", [](const LabelSetSummary& s) { return std::to_string(s.total_n_fields); });
    row("mean_n_per_site", [](const LabelSetSummary& s) { return fmt_fixed(s.mean_n_per_site, 3); });
    row("max_n_per_site", [](const LabelSetSummary& s) { return std::to_string(s.max_n_per_site); });
    row("n_sites_ge5", [](const LabelSetSummary& s) { return std::to_string(s.n_sites_ge5); });
    row("n_sites_0", [](const LabelSetSummary& s) { return std::to_string(s.n_sites_0); });
    row("mean_ha", [](const LabelSetSummary& s) { return fmt_fixed(s.mean_ha, 4); });
    row("median_ha", [](const LabelSetSummary& s) { return fmt_fixed(s.median_ha, 4); });
    row("sd_ha", [](const LabelSetSummary& s) { return fmt_fixed(s.sd_ha, 4); });
    row("n_sites", [](const LabelSetSummary& s) { return std::to_string(s.n_sites); });
    return out;
}

}  // namespace fieldlabel
