#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/io.hpp"
#include "fieldlabel/tiff.hpp"

namespace fieldlabel {

namespace detail {

inline GeoTransform require_geo(const tiff::Image& img, const std::filesystem::path& path) {
    if (!img.transform) throw DataError(path.string() + ": missing georeferencing");
    const auto& t = *img.transform;
    t.validate();
    if (std::abs(t.pixel_size_x - t.pixel_size_y) > 1e-9 * t.pixel_size_x) {
        throw DataError(path.string() + ": non-square pixels are not supported");
    }
    return t;
}

inline Grid<float> band_to_grid(const tiff::Image& img, int band) {
    Grid<float> g(img.width, img.height);
    const auto& src = img.bands[band];
    for (std::size_t i = 0; i < src.size(); ++i) g[i] = static_cast<float>(src[i]);
    return g;
}

}  // namespace detail

/// Reads a two-band (extent, boundary) float GeoTIFF.
inline ProbabilityRaster read_raster(const std::filesystem::path& path) {
    const auto img = tiff::read(path);
    if (img.bands.size() != 2) {
        throw DataError(path.string() + ": expected 2 bands (extent, boundary), found " +
                        std::to_string(img.bands.size()));
    }
    ProbabilityRaster r;
    r.transform = detail::require_geo(img, path);
    r.p_ext = detail::band_to_grid(img, 0);
    r.p_bnd = detail::band_to_grid(img, 1);
    r.validate();
    return r;
}

/// Reads extent and boundary from two single-band files that must share grid and georeferencing.
inline ProbabilityRaster read_raster(const std::filesystem::path& extent_path,
                                     const std::filesystem::path& boundary_path) {
    const auto ext = tiff::read(extent_path);
    const auto bnd = tiff::read(boundary_path);
    if (ext.bands.size() != 1 || bnd.bands.size() != 1) throw DataError("expected single-band extent and boundary files");
    ProbabilityRaster r;
    r.transform = detail::require_geo(ext, extent_path);
    if (detail::require_geo(bnd, boundary_path) != r.transform || ext.width != bnd.width || ext.height != bnd.height) {
        throw DataError("extent and boundary files disagree on grid or georeferencing");
    }
    r.p_ext = detail::band_to_grid(ext, 0);
    r.p_bnd = detail::band_to_grid(bnd, 0);
    r.validate();
    return r;
}

inline std::vector<std::uint8_t> encode_raster(const ProbabilityRaster& r) {
    r.validate();
    tiff::Image img;
    img.width = r.width();
    img.height = r.height();
    img.type = tiff::SampleType::f32;
    img.transform = r.transform;
    img.bands.emplace_back(r.p_ext.values().begin(), r.p_ext.values().end());
    img.bands.emplace_back(r.p_bnd.values().begin(), r.p_bnd.values().end());
    return tiff::encode(img);
}

inline void write_raster(const std::filesystem::path& path, const ProbabilityRaster& r) {
    write_file_atomic(path, encode_raster(r));
}

inline std::vector<std::uint8_t> encode_label_grid(const LabelGrid& labels, const GeoTransform& transform) {
    tiff::Image img;
    img.width = labels.width();
    img.height = labels.height();
    img.type = tiff::SampleType::i32;
    img.transform = transform;
    img.bands.emplace_back(labels.values().begin(), labels.values().end());
    return tiff::encode(img);
}

inline std::pair<LabelGrid, GeoTransform> read_label_grid(const std::filesystem::path& path) {
    const auto img = tiff::read(path);
    if (img.bands.size() != 1) throw DataError(path.string() + ": expected a single-band label raster");
    LabelGrid g(img.width, img.height);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = img.bands[0][i];
        if (v < 0 || v != std::floor(v)) throw DataError(path.string() + ": label values must be non-negative integers");
        g[i] = static_cast<std::int32_t>(v);
    }
    return {std::move(g), detail::require_geo(img, path)};
}

}  // namespace fieldlabel
