#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fieldlabel/edt.hpp"
#include "fieldlabel/geo.hpp"
#include "fieldlabel/labelset.hpp"
#include "fieldlabel/rasterize.hpp"
#include "fieldlabel/tiff.hpp"

namespace fieldlabel {

/// Training targets for one grid.
struct MultiTaskLabel {
    GeoTransform transform;
    Mask extent;
    Mask boundary;
    Grid<float> distance;  // per-instance normalized distance to the instance's nearest boundary pixel
    Mask valid;            // field or non-cropland label present

    int width() const { return extent.width(); }
    int height() const { return extent.height(); }
    bool has_field() const {
        return std::any_of(extent.values().begin(), extent.values().end(), [](std::uint8_t v) { return v != 0; });
    }

    friend bool operator==(const MultiTaskLabel&, const MultiTaskLabel&) = default;
};

/// Burns field polygons into an instance grid (1-based, label-file order). A pixel claimed twice is
/// kept by the first polygon when its centre lies on either polygon's outline; otherwise DataError.
inline LabelGrid burn_instances(const LabelSet& labels, int width, int height, const GeoTransform& t,
                                LabelClass cls = LabelClass::field) {
    LabelGrid owner(width, height, 0);
    std::vector<const Label*> drawn;
    for (const auto& l : labels.labels) {
        if (l.label_class != cls) continue;
        drawn.push_back(&l);
        const auto id = static_cast<std::int32_t>(drawn.size());
        for (const auto& p : rasterize_polygon(l.geometry, t, width, height)) {
            auto& o = owner(p.row, p.col);
            if (o == 0) {
                o = id;
                continue;
            }
            if (cls != LabelClass::field) continue;
            if (center_on_boundary(l.geometry, t, p) || center_on_boundary(drawn[o - 1]->geometry, t, p)) continue;
            throw DataError("site " + labels.site_id + ": overlapping field geometries at pixel (" +
                            std::to_string(p.row) + ", " + std::to_string(p.col) + ")");
        }
    }
    return owner;
}

/// Boundary (8-neighbourhood exterior test per instance; grid edge counts as exterior) and the
/// per-instance normalized distance transform for an instance grid.
inline void instance_targets(const LabelGrid& owner, Mask& boundary, Grid<float>& distance) {
    const int w = owner.width(), h = owner.height();
    boundary = Mask(w, h, 0);
    distance = Grid<float>(w, h, 0.0f);
    std::int32_t max_id = 0;
    for (auto v : owner.values()) max_id = std::max(max_id, v);
    if (max_id == 0) return;

    struct Box {
        int r0 = INT32_MAX, c0 = INT32_MAX, r1 = -1, c1 = -1;
    };
    std::vector<Box> boxes(static_cast<std::size_t>(max_id) + 1);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const auto id = owner(r, c);
            if (id <= 0) continue;
            auto& b = boxes[id];
            b.r0 = std::min(b.r0, r);
            b.c0 = std::min(b.c0, c);
            b.r1 = std::max(b.r1, r);
            b.c1 = std::max(b.c1, c);
            for (int k = 0; k < 8; ++k) {
                const int rr = r + kDy8[k], cc = c + kDx8[k];
                if (!owner.contains(rr, cc) || owner(rr, cc) != id) {
                    boundary(r, c) = 1;
                    break;
                }
            }
        }
    }
    for (std::int32_t id = 1; id <= max_id; ++id) {
        const auto& b = boxes[id];
        if (b.r1 < 0) continue;
        const int bw = b.c1 - b.c0 + 1, bh = b.r1 - b.r0 + 1;
        Mask sources(bw, bh, 0);
        for (int r = 0; r < bh; ++r)
            for (int c = 0; c < bw; ++c)
                if (owner(b.r0 + r, b.c0 + c) == id && boundary(b.r0 + r, b.c0 + c)) sources(r, c) = 1;
        const auto d2 = squared_distance_to(sources);
        double max_d = 0.0;
        for (int r = 0; r < bh; ++r)
            for (int c = 0; c < bw; ++c)
                if (owner(b.r0 + r, b.c0 + c) == id) max_d = std::max(max_d, std::sqrt(d2(r, c)));
        if (max_d == 0.0) continue;
        for (int r = 0; r < bh; ++r)
            for (int c = 0; c < bw; ++c)
                if (owner(b.r0 + r, b.c0 + c) == id) distance(b.r0 + r, b.c0 + c) = static_cast<float>(std::sqrt(d2(r, c)) / max_d);
    }
}

inline MultiTaskLabel rasterize_labels(const LabelSet& labels, int width, int height, const GeoTransform& t) {
    MultiTaskLabel out;
    out.transform = t;
    const auto owner = burn_instances(labels, width, height, t, LabelClass::field);
    out.extent = Mask(width, height, 0);
    for (std::size_t i = 0; i < owner.size(); ++i) out.extent[i] = owner[i] > 0 ? 1 : 0;
    instance_targets(owner, out.boundary, out.distance);
    out.valid = out.extent;
    for (const auto& l : labels.labels) {
        if (l.label_class != LabelClass::non_cropland) continue;
        for (const auto& p : rasterize_polygon(l.geometry, t, width, height)) out.valid(p.row, p.col) = 1;
    }
    return out;
}

struct LabelChip {
    std::string site_id;
    int row_index = 0;
    int col_index = 0;
    MultiTaskLabel label;
};

inline std::vector<LabelChip> chip_labels(const MultiTaskLabel& full, const std::string& site_id, int chip_size = 256) {
    if (full.width() % chip_size != 0 || full.height() % chip_size != 0) {
        throw DataError("chip_labels: grid is not a multiple of chip size " + std::to_string(chip_size));
    }
    std::vector<LabelChip> chips;
    for (int r = 0; r < full.height() / chip_size; ++r) {
        for (int c = 0; c < full.width() / chip_size; ++c) {
            LabelChip chip;
            chip.site_id = site_id;
            chip.row_index = r;
            chip.col_index = c;
            auto& l = chip.label;
            l.transform = full.transform.offset(c * chip_size, r * chip_size);
            l.extent = crop(full.extent, r * chip_size, c * chip_size, chip_size, chip_size);
            l.boundary = crop(full.boundary, r * chip_size, c * chip_size, chip_size, chip_size);
            l.distance = crop(full.distance, r * chip_size, c * chip_size, chip_size, chip_size);
            l.valid = crop(full.valid, r * chip_size, c * chip_size, chip_size, chip_size);
            chips.push_back(std::move(chip));
        }
    }
    return chips;
}

/// Keeps chips with at least one field pixel.
inline std::vector<LabelChip> filter_chips(const std::vector<LabelChip>& chips) {
    std::vector<LabelChip> kept;
    for (const auto& c : chips)
        if (c.label.has_field()) kept.push_back(c);
    return kept;
}

/// 4-band float32 GeoTIFF: extent, boundary, distance, valid.
inline std::vector<std::uint8_t> encode_multitask(const MultiTaskLabel& l) {
    tiff::Image img;
    img.width = l.width();
    img.height = l.height();
    img.type = tiff::SampleType::f32;
    img.transform = l.transform;
    img.bands.emplace_back(l.extent.values().begin(), l.extent.values().end());
    img.bands.emplace_back(l.boundary.values().begin(), l.boundary.values().end());
    img.bands.emplace_back(l.distance.values().begin(), l.distance.values().end());
    img.bands.emplace_back(l.valid.values().begin(), l.valid.values().end());
    return tiff::encode(img);
}

inline MultiTaskLabel decode_multitask(const tiff::Image& img) {
    if (img.bands.size() != 4 || !img.transform) throw DataError("multi-task label raster must have 4 georeferenced bands");
    MultiTaskLabel l;
    l.transform = *img.transform;
    l.extent = Mask(img.width, img.height);
    l.boundary = Mask(img.width, img.height);
    l.distance = Grid<float>(img.width, img.height);
    l.valid = Mask(img.width, img.height);
    for (std::size_t i = 0; i < l.extent.size(); ++i) {
        l.extent[i] = static_cast<std::uint8_t>(img.bands[0][i]);
        l.boundary[i] = static_cast<std::uint8_t>(img.bands[1][i]);
        l.distance[i] = static_cast<float>(img.bands[2][i]);
        l.valid[i] = static_cast<std::uint8_t>(img.bands[3][i]);
    }
    return l;
}

namespace detail {
/// Uniform integer in [0, n) by rejection; platform-independent unlike std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}
}  // namespace detail

struct SiteSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
};

/// Sorts ids, shuffles under `seed`, and assigns the first round(fraction * n) to training.
inline SiteSplit split_sites(std::vector<std::string> site_ids, double train_fraction, std::uint64_t seed) {
    if (site_ids.empty()) throw UsageError("split_sites: no sites");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0,1)");
    std::sort(site_ids.begin(), site_ids.end());
    std::mt19937_64 rng(seed);
    detail::shuffle(site_ids, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(site_ids.size())));
    SiteSplit s;
    s.train.assign(site_ids.begin(), site_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(site_ids.begin() + static_cast<std::ptrdiff_t>(n_train), site_ids.end());
    return s;
}

}  // namespace fieldlabel
