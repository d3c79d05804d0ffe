#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/segmentation.hpp"

namespace fieldlabel {

/// Median with the midpoint convention for even counts. Reorders `values`.
inline double median_inplace(std::vector<double>& values) {
    if (values.empty()) throw DataError("median of empty set");
    const std::size_t n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), mid);
    return (lower + upper) / 2.0;
}

inline double median(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    return median_inplace(v);
}

struct InstanceScore {
    std::int32_t instance_id = 0;
    double sem_c = 0.0;  // median p_ext over the instance
    double ins_c = 0.0;  // median p_bnd over its boundary pixels
    long long size_px = 0;

    friend bool operator==(const InstanceScore&, const InstanceScore&) = default;
};

inline InstanceScore score_instance(const Instance& instance, const ProbabilityRaster& raster) {
    if (instance.pixels.empty()) throw DataError("score_instance: instance " + std::to_string(instance.instance_id) + " has no pixels");
    std::vector<double> values;
    values.reserve(instance.pixels.size());
    for (const auto& p : instance.pixels) {
        if (!raster.p_ext.contains(p.row, p.col)) throw DataError("score_instance: pixel outside raster");
        values.push_back(raster.p_ext(p.row, p.col));
    }
    InstanceScore s;
    s.instance_id = instance.instance_id;
    s.size_px = static_cast<long long>(instance.pixels.size());
    s.sem_c = median_inplace(values);
    values.clear();
    for (const auto& p : instance.boundary_pixels) values.push_back(raster.p_bnd(p.row, p.col));
    s.ins_c = median_inplace(values);
    return s;
}

inline std::vector<InstanceScore> score_instances(const InstanceMap& map, const ProbabilityRaster& raster) {
    std::vector<InstanceScore> out;
    out.reserve(map.instances.size());
    for (const auto& inst : map.instances) out.push_back(score_instance(inst, raster));
    return out;
}

}  // namespace fieldlabel
