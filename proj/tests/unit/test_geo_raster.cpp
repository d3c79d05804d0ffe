#include <gtest/gtest.h>

#include <random>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/raster_io.hpp"
#include "fieldlabel/synthetic.hpp"
#include "support/oracles.hpp"

using namespace fieldlabel;

namespace {

GeoTransform utm(double x0 = 600000.0, double y0 = 1500000.0, double px = 0.6) {
    GeoTransform t;
    t.origin_x = x0;
    t.origin_y = y0;
    t.pixel_size_x = t.pixel_size_y = px;
    t.crs_id = "EPSG:32648";
    return t;
}

ProbabilityRaster ramp(int w, int h, const GeoTransform& t) {
    ProbabilityRaster r;
    r.transform = t;
    r.p_ext = Grid<float>(w, h);
    r.p_bnd = Grid<float>(w, h);
    for (std::size_t i = 0; i < r.p_ext.size(); ++i) {
        r.p_ext[i] = static_cast<float>(i % 1000) / 1000.0f;
        r.p_bnd[i] = static_cast<float>((i * 7) % 1000) / 1000.0f;
    }
    return r;
}

}  // namespace

TEST(PixelArea, FiveHundredPixelsAtSixtyCentimetres) {
    EXPECT_NEAR(pixel_area_ha(500, utm()), 0.018, 1e-15);
}

TEST(PixelArea, ZeroPixels) { EXPECT_EQ(pixel_area_ha(0, utm()), 0.0); }

TEST(PixelArea, TenThousandUnitPixelsIsOneHectare) { EXPECT_DOUBLE_EQ(pixel_area_ha(10000, utm(0, 0, 1.0)), 1.0); }

TEST(RasterIo, SmallRoundTripIsExact) {
    oracle::TempDir dir("raster");
    ProbabilityRaster r;
    r.transform = utm();
    r.p_ext = Grid<float>(2, 2);
    r.p_bnd = Grid<float>(2, 2);
    r.p_ext(0, 0) = 0.1f;
    r.p_ext(0, 1) = 0.2f;
    r.p_ext(1, 0) = 0.3f;
    r.p_ext(1, 1) = 0.4f;
    r.p_bnd(1, 1) = 1.0f;
    write_raster(dir / "r.tif", r);
    const auto back = read_raster(dir / "r.tif");
    EXPECT_EQ(back, r);
}

TEST(RasterIo, TwoFileVariantMatchesSingleFile) {
    oracle::TempDir dir("raster2");
    const auto r = ramp(8, 5, utm());
    auto single = [&](const Grid<float>& g, const std::string& name) {
        tiff::Image img;
        img.width = g.width();
        img.height = g.height();
        img.type = tiff::SampleType::f32;
        img.transform = r.transform;
        img.bands.emplace_back(g.values().begin(), g.values().end());
        write_file_atomic(dir / name, tiff::encode(img));
    };
    single(r.p_ext, "ext.tif");
    single(r.p_bnd, "bnd.tif");
    EXPECT_EQ(read_raster(dir / "ext.tif", dir / "bnd.tif"), r);
}

TEST(RasterIo, OutOfRangeValueIsRejected) {
    oracle::TempDir dir("raster_oob");
    tiff::Image img;
    img.width = 2;
    img.height = 1;
    img.type = tiff::SampleType::f32;
    img.transform = utm();
    img.bands = {{0.2, 1.5}, {0.1, 0.1}};
    write_file_atomic(dir / "bad.tif", tiff::encode(img));
    try {
        read_raster(dir / "bad.tif");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("outside [0,1]"), std::string::npos);
    }
}

TEST(RasterIo, StructuralErrors) {
    oracle::TempDir dir("raster_err");
    EXPECT_THROW(read_raster(dir / "missing.tif"), DataError);

    tiff::Image one;
    one.width = one.height = 2;
    one.transform = utm();
    one.bands = {{0, 0, 0, 0}};
    write_file_atomic(dir / "one.tif", tiff::encode(one));
    EXPECT_THROW(read_raster(dir / "one.tif"), DataError);

    tiff::Image nogeo = one;
    nogeo.bands.push_back({0, 0, 0, 0});
    nogeo.transform.reset();
    write_file_atomic(dir / "nogeo.tif", tiff::encode(nogeo));
    EXPECT_THROW(read_raster(dir / "nogeo.tif"), DataError);

    tiff::Image rect = nogeo;
    rect.transform = utm();
    rect.transform->pixel_size_y = 0.5;
    write_file_atomic(dir / "rect.tif", tiff::encode(rect));
    EXPECT_THROW(read_raster(dir / "rect.tif"), DataError);
}

TEST(RasterIo, SyntheticFullSizeMetadataPreserved) {
    oracle::TempDir dir("raster_big");
    const auto site = synthetic::make_site("big", 1024, 7);
    write_raster(dir / "big.tif", site.raster);
    const auto back = read_raster(dir / "big.tif");
    EXPECT_EQ(back.width(), 1024);
    EXPECT_EQ(back.height(), 1024);
    EXPECT_DOUBLE_EQ(back.transform.pixel_size_x, 0.6);
    EXPECT_DOUBLE_EQ(back.transform.pixel_size_y, 0.6);
    EXPECT_EQ(back.transform, site.raster.transform);
    EXPECT_EQ(back, site.raster);
}

TEST(Chips, FullSiteGivesSixteen) {
    const auto r = ramp(1024, 1024, utm());
    const auto chips = chip_raster(r, 256, "s");
    ASSERT_EQ(chips.size(), 16u);
    for (std::size_t k = 0; k < chips.size(); ++k) {
        EXPECT_EQ(chips[k].row_index, static_cast<int>(k / 4));
        EXPECT_EQ(chips[k].col_index, static_cast<int>(k % 4));
        EXPECT_EQ(chips[k].parent_site_id, "s");
    }
    EXPECT_EQ(mosaic_chips(chips), r);
}

TEST(Chips, SingleChipIsIdentity) {
    const auto r = ramp(256, 256, utm());
    const auto chips = chip_raster(r);
    ASSERT_EQ(chips.size(), 1u);
    EXPECT_EQ(chips[0].raster, r);
}

TEST(Chips, ChipOriginFollowsAffine) {
    const auto r = ramp(512, 512, utm(600000.0));
    const auto chips = chip_raster(r);
    EXPECT_NEAR(chips[1].transform.origin_x, 600153.6, 1e-9);
    EXPECT_DOUBLE_EQ(chips[1].transform.origin_y, 1500000.0);
    // Pixel (0,0) of every chip maps to the same point as the matching parent pixel.
    for (const auto& c : chips) {
        const auto a = c.transform.to_map(0, 0);
        const auto b = r.transform.to_map(c.col_index * 256, c.row_index * 256);
        EXPECT_NEAR(a.first, b.first, 1e-9);
        EXPECT_NEAR(a.second, b.second, 1e-9);
    }
}

TEST(Chips, NonDivisibleIsAnError) {
    EXPECT_THROW(chip_raster(ramp(300, 256, utm())), DataError);
    EXPECT_THROW(chip_raster(ramp(256, 256, utm()), 0), UsageError);
}

TEST(Chips, RandomMosaicRoundTrip) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 3), cols = 1 + static_cast<int>(rng() % 3);
        const auto r = oracle::random_raster(rng, cols * 32, rows * 32);
        EXPECT_EQ(mosaic_chips(chip_raster(r, 32)), r);
    }
}
