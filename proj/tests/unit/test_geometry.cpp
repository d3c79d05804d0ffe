#include <gtest/gtest.h>

#include <random>

#include "fieldlabel/geometry.hpp"
#include "fieldlabel/polygonize.hpp"
#include "fieldlabel/rasterize.hpp"
#include "support/oracles.hpp"

using namespace fieldlabel;

namespace {

GeoTransform grid_transform() {
    GeoTransform t;
    t.origin_x = 600000.0;
    t.origin_y = 1500000.0;
    t.pixel_size_x = t.pixel_size_y = 0.6;
    t.crs_id = "EPSG:32648";
    return t;
}

}  // namespace

TEST(Geometry, ShoelaceAreaAndCentroid) {
    const MultiPolygon sq{Polygon{{Ring{{0, 0}, {2, 0}, {2, 2}, {0, 2}}}}};
    EXPECT_DOUBLE_EQ(area(sq), 4.0);
    const auto [cx, cy] = centroid(sq);
    EXPECT_DOUBLE_EQ(cx, 1.0);
    EXPECT_DOUBLE_EQ(cy, 1.0);

    const MultiPolygon holed{Polygon{{Ring{{0, 0}, {4, 0}, {4, 4}, {0, 4}}, Ring{{1, 1}, {1, 2}, {2, 2}, {2, 1}}}}};
    EXPECT_DOUBLE_EQ(area(holed), 15.0);
}

TEST(Geometry, GeoJsonRoundTrip) {
    FeatureCollection fc;
    fc.crs_id = "EPSG:32648";
    Feature f;
    f.geometry = {Polygon{{Ring{{0.5, 0.25}, {3, 0}, {3, 3}}}}, Polygon{{Ring{{10, 10}, {11, 10}, {11, 11}}}}};
    f.properties["k"] = "v";
    fc.features.push_back(f);
    const auto back = feature_collection_from_json(nlohmann::json::parse(dump_geojson(fc)));
    ASSERT_EQ(back.features.size(), 1u);
    EXPECT_EQ(back.crs_id, fc.crs_id);
    EXPECT_EQ(back.features[0].geometry.size(), 2u);
    EXPECT_EQ(back.features[0].properties["k"], "v");
    EXPECT_DOUBLE_EQ(area(back.features[0].geometry), area(f.geometry));
}

TEST(Rasterize, PixelCentreRule) {
    const auto t = grid_transform();
    // A polygon covering exactly pixels rows 1..2, cols 1..3 by their outer edges.
    const auto [x0, y0] = t.to_map(1, 1);
    const auto [x1, y1] = t.to_map(4, 3);
    const MultiPolygon mp{Polygon{{Ring{{x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}}}}};
    const auto px = rasterize_polygon(mp, t, 6, 5);
    ASSERT_EQ(px.size(), 6u);
    EXPECT_EQ(px.front(), (Pixel{1, 1}));
    EXPECT_EQ(px.back(), (Pixel{2, 3}));
}

TEST(Polygonize, SingleSquareTracesFourCorners) {
    const auto t = grid_transform();
    LabelGrid g(4, 4, 0);
    for (int r = 1; r < 3; ++r)
        for (int c = 1; c < 3; ++c) g(r, c) = 1;
    const auto polys = polygonize(g, t);
    ASSERT_EQ(polys.size(), 1u);
    const auto& mp = polys.at(1);
    ASSERT_EQ(mp.size(), 1u);
    EXPECT_EQ(mp[0].rings.size(), 1u);
    EXPECT_NEAR(area(mp), 4 * 0.36, 1e-9);
    EXPECT_GT(signed_area(mp[0].rings[0]), 0.0);  // counter-clockwise exterior
}

TEST(Polygonize, HoleIsClockwise) {
    const auto t = grid_transform();
    LabelGrid g(5, 5, 1);
    g(2, 2) = 0;
    const auto mp = polygonize(g, t).at(1);
    ASSERT_EQ(mp.size(), 1u);
    ASSERT_EQ(mp[0].rings.size(), 2u);
    EXPECT_LT(signed_area(mp[0].rings[1]), 0.0);
    EXPECT_NEAR(area(mp), 24 * 0.36, 1e-9);
    EXPECT_EQ(oracle::rasterize_all({{1, mp}}, 5, 5, t), g);
}

TEST(Polygonize, DiagonalPinchSplitsIntoTwoPolygons) {
    const auto t = grid_transform();
    LabelGrid g(3, 3, 0);
    g(0, 0) = 1;
    g(1, 1) = 1;
    g(2, 2) = 1;
    const auto mp = polygonize(g, t).at(1);
    EXPECT_EQ(mp.size(), 3u);
    EXPECT_EQ(oracle::rasterize_all({{1, mp}}, 3, 3, t), g);
}

TEST(Polygonize, RandomMapsRoundTripExactly) {
    std::mt19937_64 rng(11);
    const auto t = grid_transform();
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 5 + static_cast<int>(rng() % 40), h = 5 + static_cast<int>(rng() % 40);
        const auto g = oracle::random_label_map(rng, w, h, 1 + static_cast<int>(rng() % 8));
        ASSERT_EQ(oracle::rasterize_all(polygonize(g, t), w, h, t), g) << "trial " << trial;
    }
}
