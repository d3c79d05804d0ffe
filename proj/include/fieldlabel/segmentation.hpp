#pragma once

#include <bit>
#include <cstdint>
#include <queue>
#include <vector>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/geometry.hpp"
#include "fieldlabel/grid.hpp"

namespace fieldlabel {

struct SegmentationParams {
    double t_bnd = 0.2;
    double t_ext = 0.4;
    int connectivity = 4;  // seed components only; flooding is always 4-connected

    void validate() const {
        if (!(t_bnd >= 0.0 && t_bnd <= 1.0) || !(t_ext >= 0.0 && t_ext <= 1.0)) {
            throw UsageError("segmentation thresholds must lie in [0,1]");
        }
        if (connectivity != 4 && connectivity != 8) throw UsageError("connectivity must be 4 or 8");
    }
};

struct Instance {
    std::int32_t instance_id = 0;
    std::vector<Pixel> pixels;           // row-major
    std::vector<Pixel> boundary_pixels;  // row-major subset of pixels
    long long size_px = 0;
    Point centroid;
    double area_ha = 0.0;
};

struct InstanceMap {
    GeoTransform transform;
    LabelGrid labels;  // 0 background, 1..K instance ids
    std::vector<Instance> instances;

    int width() const { return labels.width(); }
    int height() const { return labels.height(); }
};

/// mask = p_ext >= t_ext
inline Mask extent_mask(const ProbabilityRaster& raster, double t_ext) {
    Mask m(raster.width(), raster.height(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = raster.p_ext[i] >= t_ext ? 1 : 0;
    return m;
}

/// Connected components of {p_bnd < t_bnd} within the mask, labelled 1..K in scan order of their first pixel.
inline LabelGrid extract_seeds(const ProbabilityRaster& raster, const Mask& mask, double t_bnd, int connectivity = 4) {
    if (!mask.same_shape(raster.p_bnd)) throw UsageError("extract_seeds: mask and raster differ in shape");
    if (connectivity != 4 && connectivity != 8) throw UsageError("connectivity must be 4 or 8");
    const int w = raster.width(), h = raster.height();
    LabelGrid seeds(w, h, 0);
    auto is_seed = [&](std::size_t i) { return mask[i] && raster.p_bnd[i] < t_bnd; };
    const int* dx = connectivity == 4 ? kDx4 : kDx8;
    const int* dy = connectivity == 4 ? kDy4 : kDy8;
    std::int32_t next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (seeds[i] != 0 || !is_seed(i)) continue;
        seeds[i] = ++next;
        stack.push_back(i);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int r = static_cast<int>(p / w), c = static_cast<int>(p % w);
            for (int k = 0; k < connectivity; ++k) {
                const int rr = r + dy[k], cc = c + dx[k];
                if (!seeds.contains(rr, cc)) continue;
                const std::size_t q = seeds.index(rr, cc);
                if (seeds[q] == 0 && is_seed(q)) {
                    seeds[q] = next;
                    stack.push_back(q);
                }
            }
        }
    }
    return seeds;
}

/// Total order on flooding heights: boundary probability first, row-major index second. Zero is
/// reserved for seed pixels, so every non-seed key is strictly positive.
inline std::uint64_t flood_key(float p_bnd, std::size_t index) {
    return ((static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(p_bnd)) << 32) | static_cast<std::uint64_t>(index)) + 1;
}

/// Seeded priority flood over the p_bnd landscape restricted to `mask`. Every pixel reachable from a
/// seed receives the label of the neighbour through which its min-max (bottleneck) path arrives;
/// among equally low neighbours the one with the lowest level, then lowest row-major index, wins.
inline LabelGrid flood_from_seeds(const ProbabilityRaster& raster, const Mask& mask, const LabelGrid& seeds) {
    const int w = raster.width();
    const std::size_t n = seeds.size();
    LabelGrid labels = seeds;
    std::vector<std::uint64_t> level(n, 0);

    struct Entry {
        std::uint64_t level;
        std::uint64_t pusher_level;
        std::uint32_t pusher;
        std::uint32_t pixel;
        std::int32_t label;
        bool operator>(const Entry& o) const {
            if (level != o.level) return level > o.level;
            if (pusher_level != o.pusher_level) return pusher_level > o.pusher_level;
            if (pusher != o.pusher) return pusher > o.pusher;
            return pixel > o.pixel;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    // Best pending (level, pusher_level, pusher) per pixel, so dominated entries are never queued.
    std::vector<std::uint64_t> best_level(n, UINT64_MAX), best_pusher_level(n, UINT64_MAX);
    std::vector<std::uint32_t> best_pusher(n, UINT32_MAX);

    auto push_neighbours = [&](std::size_t p) {
        const int r = static_cast<int>(p / w), c = static_cast<int>(p % w);
        for (int k = 0; k < 4; ++k) {
            const int rr = r + kDy4[k], cc = c + kDx4[k];
            if (!labels.contains(rr, cc)) continue;
            const std::size_t q = labels.index(rr, cc);
            if (!mask[q] || labels[q] != 0) continue;
            const std::uint64_t lv = std::max(flood_key(raster.p_bnd[q], q), level[p]);
            const Entry e{lv, level[p], static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q), labels[p]};
            const bool better = lv != best_level[q] ? lv < best_level[q]
                                : level[p] != best_pusher_level[q] ? level[p] < best_pusher_level[q]
                                                                   : e.pusher < best_pusher[q];
            if (!better) continue;
            best_level[q] = lv;
            best_pusher_level[q] = level[p];
            best_pusher[q] = e.pusher;
            heap.push(e);
        }
    };

    for (std::size_t i = 0; i < n; ++i)
        if (seeds[i] != 0) push_neighbours(i);
    while (!heap.empty()) {
        const Entry e = heap.top();
        heap.pop();
        if (labels[e.pixel] != 0) continue;
        labels[e.pixel] = e.label;
        level[e.pixel] = e.level;
        push_neighbours(e.pixel);
    }
    return labels;
}

/// Per-instance pixel sets, 8-neighbourhood boundary pixels (grid edge counts as exterior),
/// centroid of pixel centres in map coordinates, and area.
inline std::vector<Instance> instances_from_map(const LabelGrid& labels, const GeoTransform& transform) {
    std::int32_t max_label = 0;
    for (auto v : labels.values()) max_label = std::max(max_label, v);
    std::vector<Instance> out(static_cast<std::size_t>(max_label));
    for (std::int32_t k = 0; k < max_label; ++k) out[k].instance_id = k + 1;
    std::vector<double> sum_r(out.size(), 0.0), sum_c(out.size(), 0.0);
    for (int r = 0; r < labels.height(); ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            const auto l = labels(r, c);
            if (l <= 0) continue;
            auto& inst = out[l - 1];
            inst.pixels.push_back({r, c});
            sum_r[l - 1] += r + 0.5;
            sum_c[l - 1] += c + 0.5;
            bool boundary = false;
            for (int k = 0; k < 8 && !boundary; ++k) {
                const int rr = r + kDy8[k], cc = c + kDx8[k];
                boundary = !labels.contains(rr, cc) || labels(rr, cc) != l;
            }
            if (boundary) inst.boundary_pixels.push_back({r, c});
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& inst = out[k];
        inst.size_px = static_cast<long long>(inst.pixels.size());
        if (inst.size_px == 0) throw DataError("instance ids are not dense: label " + std::to_string(k + 1) + " owns no pixel");
        inst.centroid = transform.to_map(sum_c[k] / inst.size_px, sum_r[k] / inst.size_px);
        inst.area_ha = pixel_area_ha(inst.size_px, transform);
    }
    return out;
}

inline InstanceMap watershed_segment(const ProbabilityRaster& raster, const SegmentationParams& params = {}) {
    params.validate();
    const Mask mask = extent_mask(raster, params.t_ext);
    const LabelGrid seeds = extract_seeds(raster, mask, params.t_bnd, params.connectivity);
    InstanceMap map;
    map.transform = raster.transform;
    map.labels = flood_from_seeds(raster, mask, seeds);
    map.instances = instances_from_map(map.labels, map.transform);
    return map;
}

/// Rebuilds an InstanceMap from a stored label grid.
inline InstanceMap instance_map_from_labels(LabelGrid labels, const GeoTransform& transform) {
    InstanceMap map;
    map.transform = transform;
    map.labels = std::move(labels);
    map.instances = instances_from_map(map.labels, transform);
    return map;
}

}  // namespace fieldlabel
