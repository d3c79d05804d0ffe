#pragma once

// Exact squared Euclidean distance transform (lower envelope of parabolas, two separable passes).

#include <cstdint>
#include <limits>
#include <vector>

#include "fieldlabel/grid.hpp"

namespace fieldlabel {

namespace detail {

inline void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
            if (s > z[k]) break;
            --k;  // z[0] is -inf, so this never runs past the first parabola
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = inf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

}  // namespace detail

/// Squared distance from every pixel to the nearest nonzero pixel of `sources`; +inf when there is none.
inline Grid<double> squared_distance_to(const Mask& sources) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int w = sources.width(), h = sources.height();
    Grid<double> g(w, h, inf);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (sources[i]) g[i] = 0.0;
    std::vector<double> f, d;
    std::vector<int> v;
    std::vector<double> z;
    f.resize(static_cast<std::size_t>(std::max(w, h)));
    d.resize(f.size());
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = g(r, c);
        detail::edt_1d(f.data(), h, d.data(), v, z);
        for (int r = 0; r < h; ++r) g(r, c) = d[r];
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = g(r, c);
        detail::edt_1d(f.data(), w, d.data(), v, z);
        for (int c = 0; c < w; ++c) g(r, c) = d[c];
    }
    return g;
}

}  // namespace fieldlabel
