#pragma once

// Synthetic sites with known field layouts, for oracle tests and demos.
//
// Fields are axis-aligned rectangles on a jittered grid: column cuts are shared across the site,
// row cuts vary per column band, and each cell is a field with probability `field_fraction`.
// Rendering: p_ext = 0.95 on field pixels and 0.05 elsewhere; p_bnd = 0.9 on each field's
// boundary pixels (8-neighbourhood exterior test) and 0.05 elsewhere.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/labelset.hpp"
#include "fieldlabel/manifest.hpp"
#include "fieldlabel/multitask.hpp"
#include "fieldlabel/raster_io.hpp"

namespace fieldlabel::synthetic {

inline constexpr float kInsideExt = 0.95f;
inline constexpr float kOutsideExt = 0.05f;
inline constexpr float kRidgeBnd = 0.9f;
inline constexpr float kFlatBnd = 0.05f;

struct Rect {
    int row0 = 0, col0 = 0, rows = 0, cols = 0;
};

struct LayoutParams {
    int min_cell = 16;
    int max_cell = 64;
    int margin = 4;
    double field_fraction = 0.8;
};

struct SyntheticSite {
    SiteRecord record;
    ProbabilityRaster raster;
    std::vector<Rect> fields;
    LabelSet reference;  // fields, then non-cropland patches from empty cells
};

namespace detail {

inline int uniform(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(fieldlabel::detail::bounded(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Cut positions [start, ..., end] with gaps in [lo, hi]; the last gap absorbs the remainder.
inline std::vector<int> cuts(std::mt19937_64& rng, int start, int end, int lo, int hi) {
    std::vector<int> c{start};
    while (end - c.back() > hi) c.push_back(c.back() + uniform(rng, lo, std::min(hi, end - c.back() - lo)));
    c.push_back(end);
    return c;
}

inline MultiPolygon rect_polygon(const Rect& r, const GeoTransform& t) {
    const auto [x0, y0] = t.to_map(r.col0, r.row0);
    const auto [x1, y1] = t.to_map(r.col0 + r.cols, r.row0 + r.rows);
    // Counter-clockwise in map coordinates (y up).
    return {Polygon{{Ring{{x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}}}}};
}

}  // namespace detail

inline SyntheticSite make_site(const std::string& site_id, int size_px, std::uint64_t seed, const LayoutParams& p = {}) {
    if (p.min_cell < 3 || p.max_cell < 2 * p.min_cell) throw UsageError("layout needs min_cell >= 3 and max_cell >= 2 * min_cell");
    if (size_px < 2 * p.margin + p.min_cell) throw UsageError("site too small for the layout");
    std::mt19937_64 rng(seed);
    SyntheticSite s;
    GeoTransform t;
    t.origin_x = 400000.0 + 1200.0 * detail::uniform(rng, 0, 400);
    t.origin_y = 1400000.0 + 1200.0 * detail::uniform(rng, 0, 400);
    t.pixel_size_x = t.pixel_size_y = 0.6;
    t.crs_id = "EPSG:32648";

    std::vector<Rect> empty_cells;
    const auto col_cuts = detail::cuts(rng, p.margin, size_px - p.margin, p.min_cell, p.max_cell);
    for (std::size_t ci = 0; ci + 1 < col_cuts.size(); ++ci) {
        const auto row_cuts = detail::cuts(rng, p.margin, size_px - p.margin, p.min_cell, p.max_cell);
        for (std::size_t ri = 0; ri + 1 < row_cuts.size(); ++ri) {
            const Rect r{row_cuts[ri], col_cuts[ci], row_cuts[ri + 1] - row_cuts[ri], col_cuts[ci + 1] - col_cuts[ci]};
            const bool field = fieldlabel::detail::bounded(rng, 1000) < static_cast<std::uint64_t>(p.field_fraction * 1000);
            (field ? s.fields : empty_cells).push_back(r);
        }
    }

    LabelGrid owner(size_px, size_px, 0);
    for (std::size_t k = 0; k < s.fields.size(); ++k) {
        const auto& r = s.fields[k];
        for (int y = r.row0; y < r.row0 + r.rows; ++y)
            for (int x = r.col0; x < r.col0 + r.cols; ++x) owner(y, x) = static_cast<std::int32_t>(k + 1);
    }
    Mask boundary;
    Grid<float> unused;
    instance_targets(owner, boundary, unused);

    s.raster.transform = t;
    s.raster.p_ext = Grid<float>(size_px, size_px, kOutsideExt);
    s.raster.p_bnd = Grid<float>(size_px, size_px, kFlatBnd);
    for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] > 0) s.raster.p_ext[i] = kInsideExt;
        if (boundary[i]) s.raster.p_bnd[i] = kRidgeBnd;
    }

    s.reference.site_id = site_id;
    s.reference.crs_id = t.crs_id;
    for (std::size_t k = 0; k < s.fields.size(); ++k) {
        Label l;
        l.geometry = detail::rect_polygon(s.fields[k], t);
        l.area_ha = pixel_area_ha(static_cast<long long>(s.fields[k].rows) * s.fields[k].cols, t);
        l.ref_id = "f" + std::to_string(k + 1);
        s.reference.labels.push_back(std::move(l));
    }
    // Up to two empty cells become non-cropland reference patches.
    for (std::size_t k = 0; k < empty_cells.size() && k < 2; ++k) {
        Label l;
        l.geometry = detail::rect_polygon(empty_cells[k], t);
        l.label_class = LabelClass::non_cropland;
        l.area_ha = pixel_area_ha(static_cast<long long>(empty_cells[k].rows) * empty_cells[k].cols, t);
        l.ref_id = "n" + std::to_string(k + 1);
        s.reference.labels.push_back(std::move(l));
    }

    static const char* kProvinces[] = {"north", "south", "east", "west"};
    s.record.site_id = site_id;
    s.record.acquisition_date = Date{2019 + detail::uniform(rng, 0, 1), detail::uniform(rng, 1, 12), detail::uniform(rng, 1, 28)};
    s.record.province = kProvinces[detail::uniform(rng, 0, 3)];
    s.record.split = detail::uniform(rng, 0, 4) == 0 ? Split::test : Split::unlabeled;
    return s;
}

struct FixtureParams {
    int n_sites = 50;
    std::vector<int> sizes = {256, 512, 768, 1024};
    std::uint64_t seed = 1;
    LayoutParams layout;
};

/// Site i uses size sizes[i % sizes.size()] and seed `seed * 1000003 + i`.
inline std::vector<SyntheticSite> make_fixture(const FixtureParams& p) {
    std::vector<SyntheticSite> out;
    for (int i = 0; i < p.n_sites; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "site_%03d", i);
        const int size = p.sizes[static_cast<std::size_t>(i) % p.sizes.size()];
        out.push_back(make_site(id, size, p.seed * 1000003ULL + static_cast<std::uint64_t>(i), p.layout));
    }
    return out;
}

/// Writes rasters/<id>.tif, references/<id>.geojson and manifest.jsonl (relative paths) under `dir`.
inline std::filesystem::path write_fixture(const std::filesystem::path& dir, std::vector<SyntheticSite>& sites) {
    std::vector<SiteRecord> records;
    for (auto& s : sites) {
        const auto raster_rel = std::filesystem::path("rasters") / (s.record.site_id + ".tif");
        const auto ref_rel = std::filesystem::path("references") / (s.record.site_id + ".geojson");
        write_raster(dir / raster_rel, s.raster);
        write_file_atomic(dir / ref_rel, dump_label_set(s.reference));
        SiteRecord r = s.record;
        r.raster_path = raster_rel.generic_string();
        r.reference_path = ref_rel.generic_string();
        records.push_back(r);
        s.record.raster_path = (dir / raster_rel).lexically_normal().string();
        s.record.reference_path = (dir / ref_rel).lexically_normal().string();
    }
    const auto manifest = dir / "manifest.jsonl";
    write_file_atomic(manifest, dump_manifest(records));
    return manifest;
}

}  // namespace fieldlabel::synthetic
