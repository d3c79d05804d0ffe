#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "fieldlabel/geometry.hpp"
#include "fieldlabel/grid.hpp"

namespace fieldlabel {

namespace detail {

// Directions of a pixel-boundary edge on screen (rows grow downward). The interior is always on the
// left of travel; the left turn of direction d is (d + 1) % 4.
enum Dir : std::uint8_t { kWest = 0, kSouth = 1, kEast = 2, kNorth = 3 };

struct PixelEdge {
    int x0, y0, x1, y1;
    Dir dir;
    std::size_t owner;  // pixel index the edge bounds
};

}  // namespace detail

/// Traces pixel-edge outlines for every positive label. Diagonally touching pixels are kept apart,
/// so each 4-connected component becomes one Polygon (exterior counter-clockwise, holes clockwise)
/// and rasterizing the result with pixel-center sampling reproduces the label's pixels exactly.
inline std::map<std::int32_t, MultiPolygon> polygonize(const LabelGrid& labels, const GeoTransform& t) {
    using namespace detail;
    const int w = labels.width(), h = labels.height();
    auto at = [&](int r, int c) -> std::int32_t { return labels.contains(r, c) ? labels(r, c) : 0; };

    std::map<std::int32_t, std::vector<PixelEdge>> edges_by_label;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const auto l = labels(r, c);
            if (l <= 0) continue;
            auto& edges = edges_by_label[l];
            const std::size_t owner = labels.index(r, c);
            if (at(r - 1, c) != l) edges.push_back({c + 1, r, c, r, kWest, owner});
            if (at(r, c - 1) != l) edges.push_back({c, r, c, r + 1, kSouth, owner});
            if (at(r + 1, c) != l) edges.push_back({c, r + 1, c + 1, r + 1, kEast, owner});
            if (at(r, c + 1) != l) edges.push_back({c + 1, r + 1, c + 1, r, kNorth, owner});
        }
    }

    // 4-connected components per label, numbered in scan order of their first pixel.
    std::vector<std::int32_t> comp(labels.size(), -1);
    std::int32_t n_comp = 0;
    {
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] <= 0 || comp[i] >= 0) continue;
            const auto l = labels[i];
            comp[i] = n_comp;
            stack.push_back(i);
            while (!stack.empty()) {
                const std::size_t p = stack.back();
                stack.pop_back();
                const int r = static_cast<int>(p / w), c = static_cast<int>(p % w);
                for (int k = 0; k < 4; ++k) {
                    const int rr = r + kDy4[k], cc = c + kDx4[k];
                    if (!labels.contains(rr, cc)) continue;
                    const std::size_t q = labels.index(rr, cc);
                    if (labels[q] == l && comp[q] < 0) {
                        comp[q] = n_comp;
                        stack.push_back(q);
                    }
                }
            }
            ++n_comp;
        }
    }

    const auto to_map = [&](int x, int y) { return Point{t.origin_x + x * t.pixel_size_x, t.origin_y - y * t.pixel_size_y}; };
    const auto vkey = [&](int x, int y) { return static_cast<std::int64_t>(y) * (w + 1) + x; };

    std::map<std::int32_t, MultiPolygon> out;
    for (auto& [label, edges] : edges_by_label) {
        std::unordered_map<std::int64_t, std::vector<std::size_t>> outgoing;
        outgoing.reserve(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) outgoing[vkey(edges[i].x0, edges[i].y0)].push_back(i);

        auto successor = [&](std::size_t e) {
            const auto& cand = outgoing.at(vkey(edges[e].x1, edges[e].y1));
            if (cand.size() == 1) return cand.front();
            const auto want = static_cast<Dir>((edges[e].dir + 1) % 4);
            for (auto i : cand)
                if (edges[i].dir == want) return i;
            return cand.front();
        };

        // Polygons keyed by component; exterior found by orientation.
        std::map<std::int32_t, Ring> exteriors;
        std::map<std::int32_t, std::vector<Ring>> holes;
        std::vector<bool> used(edges.size(), false);
        for (std::size_t start = 0; start < edges.size(); ++start) {
            if (used[start]) continue;
            Ring ring;
            std::size_t e = start;
            Dir prev = edges[start].dir;
            bool first = true;
            do {
                used[e] = true;
                if (first || edges[e].dir != prev) ring.push_back(to_map(edges[e].x0, edges[e].y0));
                prev = edges[e].dir;
                first = false;
                e = successor(e);
            } while (e != start);
            // The start vertex is redundant when the closing edge runs straight into the first one.
            if (edges[start].dir == prev && ring.size() > 1) ring.erase(ring.begin());
            const auto cid = comp[edges[start].owner];
            if (signed_area(ring) > 0) {
                exteriors[cid] = std::move(ring);
            } else {
                holes[cid].push_back(std::move(ring));
            }
        }
        MultiPolygon mp;
        for (auto& [cid, ext] : exteriors) {
            Polygon poly;
            poly.rings.push_back(std::move(ext));
            for (auto& hole : holes[cid]) poly.rings.push_back(std::move(hole));
            mp.push_back(std::move(poly));
        }
        out.emplace(label, std::move(mp));
    }
    return out;
}

}  // namespace fieldlabel
