#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/geometry.hpp"

namespace fieldlabel {

/// Pixels whose centers fall inside the polygon (even-odd over all rings), row-major order.
/// Pixels outside the grid are ignored.
inline std::vector<Pixel> rasterize_polygon(const MultiPolygon& mp, const GeoTransform& t, int width, int height) {
    struct Edge {
        double x0, y0, x1, y1;
    };
    std::vector<Edge> edges;
    double min_y = INFINITY, max_y = -INFINITY;
    for (const auto& poly : mp) {
        for (const auto& ring : poly.rings) {
            const std::size_t n = ring.size();
            for (std::size_t i = 0; i < n; ++i) {
                auto [c0, r0] = t.to_pixel(ring[i].first, ring[i].second);
                auto [c1, r1] = t.to_pixel(ring[(i + 1) % n].first, ring[(i + 1) % n].second);
                edges.push_back({c0, r0, c1, r1});
                min_y = std::min({min_y, r0, r1});
                max_y = std::max({max_y, r0, r1});
            }
        }
    }
    std::vector<Pixel> out;
    if (edges.empty()) return out;
    const int row_lo = std::max(0, static_cast<int>(std::floor(min_y)));
    const int row_hi = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
    std::vector<double> xs;
    for (int r = row_lo; r <= row_hi; ++r) {
        const double yc = r + 0.5;
        xs.clear();
        for (const auto& e : edges) {
            if ((e.y0 > yc) != (e.y1 > yc)) xs.push_back(e.x0 + (yc - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // centers c + 0.5 in [xa, xb)
            const int c_lo = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            const int c_hi = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
            for (int c = c_lo; c < c_hi; ++c) out.push_back({r, c});
        }
    }
    return out;
}

/// True when the pixel center lies on (within tol pixels of) any ring edge.
inline bool center_on_boundary(const MultiPolygon& mp, const GeoTransform& t, Pixel p, double tol = 1e-9) {
    const double px = p.col + 0.5, py = p.row + 0.5;
    for (const auto& poly : mp) {
        for (const auto& ring : poly.rings) {
            const std::size_t n = ring.size();
            for (std::size_t i = 0; i < n; ++i) {
                auto [x0, y0] = t.to_pixel(ring[i].first, ring[i].second);
                auto [x1, y1] = t.to_pixel(ring[(i + 1) % n].first, ring[(i + 1) % n].second);
                const double dx = x1 - x0, dy = y1 - y0;
                const double len2 = dx * dx + dy * dy;
                double s = len2 > 0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
                s = std::clamp(s, 0.0, 1.0);
                const double ex = x0 + s * dx - px, ey = y0 + s * dy - py;
                if (ex * ex + ey * ey <= tol * tol) return true;
            }
        }
    }
    return false;
}

}  // namespace fieldlabel
