#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fieldlabel/grid.hpp"

namespace fieldlabel {

/// North-up affine georeferencing. Rows grow southward; both pixel sizes are positive magnitudes.
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = 1.0;
    std::string crs_id;

    void validate() const {
        if (!(pixel_size_x > 0.0) || !(pixel_size_y > 0.0) || !std::isfinite(pixel_size_x) ||
            !std::isfinite(pixel_size_y) || !std::isfinite(origin_x) || !std::isfinite(origin_y)) {
            throw DataError("geotransform: pixel sizes must be finite and positive");
        }
    }

    /// Map coordinates of a (possibly fractional) pixel position. (0,0) is the top-left corner.
    std::pair<double, double> to_map(double col, double row) const {
        return {origin_x + col * pixel_size_x, origin_y - row * pixel_size_y};
    }
    std::pair<double, double> pixel_center(int row, int col) const {
        return to_map(col + 0.5, row + 0.5);
    }
    /// Fractional (col, row) of a map coordinate.
    std::pair<double, double> to_pixel(double x, double y) const {
        return {(x - origin_x) / pixel_size_x, (origin_y - y) / pixel_size_y};
    }

    GeoTransform offset(int col_px, int row_px) const {
        GeoTransform t = *this;
        t.origin_x = origin_x + col_px * pixel_size_x;
        t.origin_y = origin_y - row_px * pixel_size_y;
        return t;
    }

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

inline double pixel_area_ha(long long n_pixels, const GeoTransform& transform) {
    return static_cast<double>(n_pixels) * transform.pixel_size_x * transform.pixel_size_y / 10000.0;
}

struct ProbabilityRaster {
    GeoTransform transform;
    Grid<float> p_ext;
    Grid<float> p_bnd;

    int width() const { return p_ext.width(); }
    int height() const { return p_ext.height(); }

    /// Throws DataError on shape mismatch or any value outside [0,1].
    void validate() const {
        transform.validate();
        if (!p_ext.same_shape(p_bnd)) throw DataError("raster: extent and boundary bands differ in shape");
        auto check = [](const Grid<float>& g, const char* band) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const float v = g[i];
                if (!(v >= 0.0f && v <= 1.0f)) {
                    throw DataError(std::string("raster: ") + band + " value " + std::to_string(v) +
                                    " at pixel " + std::to_string(i) + " outside [0,1]");
                }
            }
        };
        check(p_ext, "extent");
        check(p_bnd, "boundary");
    }

    friend bool operator==(const ProbabilityRaster&, const ProbabilityRaster&) = default;
};

struct Chip {
    std::string parent_site_id;
    int row_index = 0;
    int col_index = 0;
    int size = 256;
    GeoTransform transform;
    ProbabilityRaster raster;
};

template <typename T>
Grid<T> crop(const Grid<T>& g, int row0, int col0, int width, int height) {
    if (row0 < 0 || col0 < 0 || row0 + height > g.height() || col0 + width > g.width()) {
        throw UsageError("crop window outside grid");
    }
    Grid<T> out(width, height);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) out(r, c) = g(row0 + r, col0 + c);
    return out;
}

/// Tiles the raster into chip_size squares in row-major order.
inline std::vector<Chip> chip_raster(const ProbabilityRaster& raster, int chip_size = 256,
                                     const std::string& site_id = {}) {
    if (chip_size <= 0) throw UsageError("chip size must be positive");
    if (raster.width() % chip_size != 0 || raster.height() % chip_size != 0) {
        throw DataError("chip_raster: " + std::to_string(raster.width()) + "x" + std::to_string(raster.height()) +
                        " is not a multiple of chip size " + std::to_string(chip_size));
    }
    std::vector<Chip> chips;
    const int rows = raster.height() / chip_size;
    const int cols = raster.width() / chip_size;
    chips.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Chip chip;
            chip.parent_site_id = site_id;
            chip.row_index = r;
            chip.col_index = c;
            chip.size = chip_size;
            chip.transform = raster.transform.offset(c * chip_size, r * chip_size);
            chip.raster.transform = chip.transform;
            chip.raster.p_ext = crop(raster.p_ext, r * chip_size, c * chip_size, chip_size, chip_size);
            chip.raster.p_bnd = crop(raster.p_bnd, r * chip_size, c * chip_size, chip_size, chip_size);
            chips.push_back(std::move(chip));
        }
    }
    return chips;
}

/// Inverse of chip_raster for a complete row-major chip list.
inline ProbabilityRaster mosaic_chips(const std::vector<Chip>& chips) {
    if (chips.empty()) throw UsageError("mosaic of zero chips");
    int rows = 0, cols = 0;
    for (const auto& c : chips) {
        rows = std::max(rows, c.row_index + 1);
        cols = std::max(cols, c.col_index + 1);
    }
    if (static_cast<std::size_t>(rows) * cols != chips.size()) throw UsageError("mosaic: incomplete chip set");
    const int size = chips.front().size;
    ProbabilityRaster out;
    out.transform = chips.front().transform.offset(-chips.front().col_index * size, -chips.front().row_index * size);
    out.p_ext = Grid<float>(cols * size, rows * size);
    out.p_bnd = Grid<float>(cols * size, rows * size);
    for (const auto& chip : chips) {
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                out.p_ext(chip.row_index * size + r, chip.col_index * size + c) = chip.raster.p_ext(r, c);
                out.p_bnd(chip.row_index * size + r, chip.col_index * size + c) = chip.raster.p_bnd(r, c);
            }
        }
    }
    return out;
}

}  // namespace fieldlabel
