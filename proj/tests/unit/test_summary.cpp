#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fieldlabel/summary.hpp"

using namespace fieldlabel;

namespace {

LabelSet site_with(const std::vector<double>& areas, int noncrop = 0) {
    LabelSet s;
    for (double a : areas) {
        Label l;
        l.area_ha = a;
        s.labels.push_back(l);
    }
    for (int i = 0; i < noncrop; ++i) {
        Label l;
        l.label_class = LabelClass::non_cropland;
        l.area_ha = 9.0;
        s.labels.push_back(l);
    }
    return s;
}

}  // namespace

TEST(Summary, Singleton) {
    const auto s = summarize_label_set(std::vector<LabelSet>{site_with({0.1})});
    EXPECT_EQ(s.total_n_fields, 1);
    EXPECT_EQ(s.mean_n_per_site, 1.0);
    EXPECT_EQ(s.median_ha, 0.1);
    EXPECT_EQ(s.mean_ha, 0.1);
    EXPECT_EQ(s.sd_ha, 0.0);
}

TEST(Summary, EmptySitesCount) {
    const auto s = summarize_label_set(std::vector<LabelSet>{site_with({0.1, 0.3}), site_with({}, 2)});
    EXPECT_EQ(s.mean_n_per_site, 1.0);
    EXPECT_EQ(s.n_sites_0, 1);
    EXPECT_EQ(s.max_n_per_site, 2);
    EXPECT_DOUBLE_EQ(s.median_ha, 0.2);
    EXPECT_NEAR(s.sd_ha, std::sqrt(0.02), 1e-15);  // sample SD of {0.1, 0.3}
    EXPECT_EQ(s.n_sites, 2);
    EXPECT_THROW(summarize_label_set(std::vector<LabelSet>{}), DataError);
}

TEST(Summary, SitesWithAtLeastFive) {
    const auto s = summarize_label_set(std::vector<LabelSet>{site_with({1, 1, 1, 1, 1}), site_with({1, 1, 1, 1})});
    EXPECT_EQ(s.n_sites_ge5, 1);
}

TEST(Summary, SiteOrderDoesNotMatter) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.001, 1.4);
    std::vector<LabelSet> sets;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> areas(rng() % 12);
        for (auto& a : areas) a = u(rng);
        sets.push_back(site_with(areas));
    }
    const auto ref = summarize_label_set(sets);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(sets.begin(), sets.end(), rng);
        const auto s = summarize_label_set(sets);
        EXPECT_EQ(s.mean_ha, ref.mean_ha);
        EXPECT_EQ(s.sd_ha, ref.sd_ha);
        EXPECT_EQ(s.median_ha, ref.median_ha);
    }
}

TEST(Summary, TableLayout) {
    const auto s = summarize_label_set(std::vector<LabelSet>{site_with({0.1})});
    const auto t = render_summary_table({{"human", s}, {"abs_0.990", s}});
    EXPECT_EQ(t.substr(0, t.find('\n')), "statistic\thuman\tabs_0.990");
    EXPECT_NE(t.find("total_n_fields\t1\t1\n"), std::string::npos);
    EXPECT_NE(t.find("mean_ha\t0.1000\t0.1000\n"), std::string::npos);
}
