#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/io.hpp"

namespace fieldlabel {

using Point = std::pair<double, double>;

/// Open ring: the closing vertex is implied, never stored.
using Ring = std::vector<Point>;

/// First ring is the exterior, the rest are holes.
struct Polygon {
    std::vector<Ring> rings;
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

using MultiPolygon = std::vector<Polygon>;

struct Feature {
    MultiPolygon geometry;
    nlohmann::json properties = nlohmann::json::object();
};

struct FeatureCollection {
    std::string crs_id;
    std::vector<Feature> features;
};

/// Shoelace area; positive for counter-clockwise rings in a y-up frame.
// Shoelace sums are taken relative to the first vertex so projected coordinates in the
// hundreds of thousands of metres do not swamp sub-metre pixel areas.
inline double signed_area(const Ring& ring) {
    if (ring.empty()) return 0.0;
    const auto [ox, oy] = ring.front();
    double a = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = ring[i];
        const auto& q = ring[(i + 1) % n];
        a += (p.first - ox) * (q.second - oy) - (q.first - ox) * (p.second - oy);
    }
    return 0.5 * a;
}

inline double polygon_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.rings.size(); ++i) {
        const double ra = std::abs(signed_area(poly.rings[i]));
        a += i == 0 ? ra : -ra;
    }
    return a;
}

inline double area(const MultiPolygon& mp) {
    double a = 0.0;
    for (const auto& p : mp) a += polygon_area(p);
    return a;
}

/// Area centroid (holes subtract). Falls back to the vertex mean for degenerate zero-area input.
inline Point centroid(const MultiPolygon& mp) {
    double sum_a = 0.0, sum_x = 0.0, sum_y = 0.0;
    for (const auto& poly : mp) {
        for (std::size_t i = 0; i < poly.rings.size(); ++i) {
            const auto& ring = poly.rings[i];
            const double sa = signed_area(ring);
            if (sa == 0.0) continue;
            const auto [ox, oy] = ring.front();
            double cx = 0.0, cy = 0.0;
            const std::size_t n = ring.size();
            for (std::size_t k = 0; k < n; ++k) {
                const double px = ring[k].first - ox, py = ring[k].second - oy;
                const double qx = ring[(k + 1) % n].first - ox, qy = ring[(k + 1) % n].second - oy;
                const double cross = px * qy - qx * py;
                cx += (px + qx) * cross;
                cy += (py + qy) * cross;
            }
            cx = cx / (6.0 * sa) + ox;
            cy = cy / (6.0 * sa) + oy;
            const double w = (i == 0 ? 1.0 : -1.0) * std::abs(sa);
            sum_a += w;
            sum_x += w * cx;
            sum_y += w * cy;
        }
    }
    if (sum_a != 0.0) return {sum_x / sum_a, sum_y / sum_a};
    double x = 0.0, y = 0.0;
    std::size_t n = 0;
    for (const auto& poly : mp)
        for (const auto& ring : poly.rings)
            for (const auto& p : ring) {
                x += p.first;
                y += p.second;
                ++n;
            }
    if (n == 0) throw DataError("centroid of empty geometry");
    return {x / n, y / n};
}

namespace detail {

inline Ring parse_ring(const nlohmann::json& coords) {
    Ring ring;
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2) throw DataError("geojson: malformed coordinate");
        ring.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
    if (ring.size() < 3) throw DataError("geojson: ring with fewer than 3 distinct vertices");
    return ring;
}

inline Polygon parse_polygon(const nlohmann::json& coords) {
    Polygon p;
    for (const auto& r : coords) p.rings.push_back(parse_ring(r));
    if (p.rings.empty()) throw DataError("geojson: polygon without rings");
    return p;
}

inline nlohmann::json ring_json(const Ring& ring) {
    auto arr = nlohmann::json::array();
    for (const auto& p : ring) arr.push_back({p.first, p.second});
    if (!ring.empty()) arr.push_back({ring.front().first, ring.front().second});
    return arr;
}

inline nlohmann::json polygon_json(const Polygon& poly) {
    auto arr = nlohmann::json::array();
    for (const auto& r : poly.rings) arr.push_back(ring_json(r));
    return arr;
}

}  // namespace detail

inline MultiPolygon parse_geometry(const nlohmann::json& g) {
    const auto type = g.at("type").get<std::string>();
    const auto& coords = g.at("coordinates");
    if (type == "Polygon") return {detail::parse_polygon(coords)};
    if (type == "MultiPolygon") {
        MultiPolygon mp;
        for (const auto& p : coords) mp.push_back(detail::parse_polygon(p));
        return mp;
    }
    throw DataError("geojson: unsupported geometry type " + type);
}

inline nlohmann::json geometry_json(const MultiPolygon& mp) {
    if (mp.size() == 1) return {{"type", "Polygon"}, {"coordinates", detail::polygon_json(mp.front())}};
    auto arr = nlohmann::json::array();
    for (const auto& p : mp) arr.push_back(detail::polygon_json(p));
    return {{"type", "MultiPolygon"}, {"coordinates", arr}};
}

inline nlohmann::json to_json(const FeatureCollection& fc) {
    nlohmann::json j;
    j["type"] = "FeatureCollection";
    if (!fc.crs_id.empty()) j["crs"] = {{"type", "name"}, {"properties", {{"name", fc.crs_id}}}};
    j["features"] = nlohmann::json::array();
    for (const auto& f : fc.features) {
        j["features"].push_back({{"type", "Feature"}, {"properties", f.properties}, {"geometry", geometry_json(f.geometry)}});
    }
    return j;
}

inline FeatureCollection feature_collection_from_json(const nlohmann::json& j) {
    if (j.value("type", "") != "FeatureCollection") throw DataError("geojson: expected a FeatureCollection");
    FeatureCollection fc;
    if (j.contains("crs")) fc.crs_id = j["crs"].at("properties").at("name").get<std::string>();
    for (const auto& f : j.at("features")) {
        Feature feat;
        if (f.contains("properties") && f["properties"].is_object()) feat.properties = f["properties"];
        if (!f.contains("geometry") || f["geometry"].is_null()) throw DataError("geojson: feature without geometry");
        feat.geometry = parse_geometry(f["geometry"]);
        fc.features.push_back(std::move(feat));
    }
    return fc;
}

inline std::string dump_geojson(const FeatureCollection& fc) { return to_json(fc).dump(1) + "\n"; }

inline FeatureCollection read_geojson(const std::filesystem::path& path) {
    try {
        return feature_collection_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_geojson(const std::filesystem::path& path, const FeatureCollection& fc) {
    write_file_atomic(path, dump_geojson(fc));
}

}  // namespace fieldlabel
