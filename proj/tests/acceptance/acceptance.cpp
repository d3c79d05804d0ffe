// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit status 1 if anything fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "fieldlabel/pipeline/stages.hpp"
#include "fieldlabel/polygonize.hpp"
#include "fieldlabel/rasterize.hpp"
#include "fieldlabel/synthetic.hpp"
#include "support/oracles.hpp"

using namespace fieldlabel;
using namespace fieldlabel::pipeline;

namespace {

struct Outcome {
    enum Kind { pass, fail, skip } kind = pass;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::fail) ++failures;
    std::printf("%s  %-28s %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
}

constexpr Stage kStages[] = {Stage::segment,     Stage::score,     Stage::select,   Stage::labels,
                             Stage::eval_object, Stage::eval_site, Stage::summarize};

GeoTransform utm_grid() {
    GeoTransform t;
    t.origin_x = 600000.0;
    t.origin_y = 1500000.0;
    t.pixel_size_x = t.pixel_size_y = 0.6;
    t.crs_id = "EPSG:32648";
    return t;
}

Label box(const GeoTransform& t, int row0, int col0, int rows, int cols) {
    const auto [x0, y0] = t.to_map(col0, row0);
    const auto [x1, y1] = t.to_map(col0 + cols, row0 + rows);
    Label l;
    l.geometry = {Polygon{{Ring{{x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}}}}};
    l.area_ha = area(l.geometry) / 10000.0;
    return l;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------------------------

Outcome synthetic_end_to_end() {
    oracle::TempDir dir("accept_e2e");
    synthetic::FixtureParams fp;
    fp.n_sites = 50;
    fp.sizes = {256, 512, 768, 1024};
    fp.seed = 2024;
    auto sites = synthetic::make_fixture(fp);
    PipelineConfig cfg;
    cfg.manifest_path = synthetic::write_fixture(dir / "data", sites);
    cfg.output_dir = dir / "out";
    cfg.workers = 1;
    cfg.strategies = {"p99_sem"};

    const auto t0 = std::chrono::steady_clock::now();
    for (auto s : {Stage::segment, Stage::score, Stage::select, Stage::eval_object}) {
        const auto r = run_stage(s, cfg);
        if (r.exit_code != kExitOk) return {Outcome::fail, to_string(s) + " exited " + std::to_string(r.exit_code)};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const Layout layout{cfg.output_dir};
    std::vector<FieldMatch> all;
    int count_mismatch = 0, low_iou = 0;
    for (const auto& s : sites) {
        const auto pred = load_instances(layout.instances(s.record.site_id));
        if (pred.instances.size() != s.fields.size()) ++count_mismatch;
        auto matches = parse_match_table(read_text_file(layout.matches(s.record.site_id)));
        std::set<std::int32_t> distinct;
        for (const auto& m : matches) {
            if (m.iou < 0.90) ++low_iou;
            if (m.pred_id) distinct.insert(*m.pred_id);
        }
        if (matches.size() != s.fields.size() || distinct.size() != s.fields.size()) ++count_mismatch;
        all.insert(all.end(), matches.begin(), matches.end());
    }
    const auto agg = aggregate(all);
    const bool ok = agg.mIoU >= 0.95 && count_mismatch == 0 && low_iou == 0 && seconds < 60.0;
    return verdict(ok, fmt("mIoU=%.4f fields=%zu count_mismatch_sites=%d iou<0.90=%d runtime=%.1fs", agg.mIoU, all.size(),
                           count_mismatch, low_iou, seconds));
}

Outcome watershed_oracle() {
    std::mt19937_64 rng(7001);
    std::size_t bad = 0, pixels = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 20), h = 1 + static_cast<int>(rng() % 20);
        const int levels = trial % 3 == 0 ? 0 : 2 + static_cast<int>(rng() % 6);
        const auto r = oracle::random_raster(rng, w, h, levels);
        SegmentationParams p;
        p.connectivity = trial % 2 ? 8 : 4;
        const auto got = watershed_segment(r, p).labels;
        const auto want = oracle::minimax_basins(r, p.t_ext, p.t_bnd, p.connectivity);
        for (std::size_t i = 0; i < got.size(); ++i) bad += got[i] != want[i];
        pixels += got.size();
    }
    return verdict(bad == 0, fmt("200 grids, %zu pixels, %zu mismatches", pixels, bad));
}

Outcome scoring_oracle() {
    std::mt19937_64 rng(7002);
    std::size_t checked = 0, bad = 0;
    while (checked < 1000) {
        const auto r = oracle::random_raster(rng, 16, 12, checked % 2 ? 5 : 0);
        const auto map = watershed_segment(r);
        for (const auto& s : score_instances(map, r)) {
            const auto& inst = map.instances[static_cast<std::size_t>(s.instance_id - 1)];
            std::vector<double> ext, bnd;
            for (auto p : inst.pixels) ext.push_back(r.p_ext(p.row, p.col));
            for (auto p : inst.boundary_pixels) bnd.push_back(r.p_bnd(p.row, p.col));
            bad += s.sem_c != oracle::sorted_median(ext) || s.ins_c != oracle::sorted_median(bnd);
            ++checked;
        }
    }
    return verdict(bad == 0, fmt("%zu instances, %zu mismatches", checked, bad));
}

Outcome selection_properties() {
    std::mt19937_64 rng(7003);
    std::uniform_real_distribution<double> u(0, 1);
    auto scores_of = [&](std::size_t n) {
        std::vector<InstanceScore> s;
        for (std::size_t i = 0; i < n; ++i)
            s.push_back({static_cast<std::int32_t>(i + 1), u(rng), u(rng), 1 + static_cast<long long>(rng() % 3000)});
        return s;
    };
    std::size_t monotone_bad = 0, card_bad = 0, overlap = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = scores_of(1 + rng() % 80);
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        const auto lo = select_absolute_fields(s, a), hi = select_absolute_fields(s, b);
        const std::set<std::int32_t> los(lo.begin(), lo.end());
        for (auto id : hi) monotone_bad += !los.contains(id);
    }
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 500;
        const auto s = scores_of(n);  // continuous draws, so scores are distinct
        const auto sel = select_fields(s, adaptive_sem_strategy(99));
        card_bad += sel.size() > static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(n))) + 1;
    }
    std::vector<SelectionStrategy> all = standard_strategies();
    for (const char* id : {"abs_0.750", "abs_0.800", "abs_1.000", "p50_sem", "p90_sem", "p97_sem_size800", "p75_sem_ins"})
        all.push_back(parse_strategy(id));
    for (auto rule : {NegativeRule::adaptive_p10, NegativeRule::adaptive_p25_both}) {
        for (auto st : standard_strategies()) {
            if (st.kind == StrategyKind::absolute) continue;
            st.negative_rule = rule;
            all.push_back(st);
        }
    }
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = scores_of(1 + rng() % 60);
        for (const auto& st : all) {
            const auto f = select_fields(s, st);
            const std::set<std::int32_t> fs_(f.begin(), f.end());
            for (auto id : select_noncrop(s, st)) overlap += fs_.contains(id);
        }
    }
    return verdict(monotone_bad + card_bad + overlap == 0,
                   fmt("monotonicity violations=%zu (1000 trials), cardinality violations=%zu (300 sets), "
                       "field/non-cropland overlaps=%zu (%zu strategies)",
                       monotone_bad, card_bad, overlap, all.size()));
}

Outcome metric_identities() {
    std::mt19937_64 rng(7004);
    double worst = 0;
    int pairs = 0;
    while (pairs < 1000) {
        std::vector<Pixel> a, b;
        const int p1 = 1 + static_cast<int>(rng() % 6), p2 = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < 100; ++i) {
            if (rng() % p1 == 0) a.push_back({i / 10, i % 10});
            if (rng() % p2 == 0) b.push_back({i / 10, i % 10});
        }
        if (a.empty() || b.empty()) continue;
        const auto s = pair_scores(a, b);
        worst = std::max(worst, std::abs(s.dice - 2 * s.iou / (1 + s.iou)));
        const double p = s.precision, r = s.recall;
        const double via_pr = p + r - p * r > 0 ? p * r / (p + r - p * r) : 0.0;
        worst = std::max(worst, std::abs(s.iou - via_pr));
        ++pairs;
    }
    std::normal_distribution<double> g(0.0, 0.1);
    int order_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<FieldMatch> m(1 + rng() % 40);
        for (auto& f : m) {
            f.ref_area_ha = std::abs(g(rng)) + 0.01;
            if (rng() % 5) {
                f.pred_id = 1;
                f.pred_area_ha = std::max(0.0, f.ref_area_ha + g(rng));
            }
        }
        const auto e = site_size_errors(m);
        order_bad += !(e.rmse_ha + 1e-15 >= e.mae_ha && e.mae_ha + 1e-15 >= std::abs(e.me_ha));
    }
    return verdict(worst <= 1e-12 && order_bad == 0,
                   fmt("1000 pairs, max identity error %.2e; 1000 vectors, ordering violations=%d", worst, order_bad));
}

Outcome relative_gain_consistency() {
    const double pseudo = relative_gain({0.674, 0.634, 0.686});
    const double combined = relative_gain({0.694, 0.634, 0.686});
    const bool ok = std::abs(pseudo - 77.4) <= 1.5 && std::abs(combined - 115.8) <= 1.5;
    return verdict(ok, fmt("pseudo 0.674 -> %.2f (77.4 +/- 1.5), combined 0.694 -> %.2f (115.8 +/- 1.5)", pseudo, combined));
}

Outcome distance_and_polygonize() {
    const auto t = utm_grid();
    int grid_bad = 0;
    {
        LabelSet s;
        s.labels.push_back(box(t, 1, 1, 3, 3));
        const auto l = rasterize_labels(s, 5, 5, t);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) grid_bad += l.distance(r + 1, c + 1) != (r == 1 && c == 1 ? 1.0f : 0.0f);
    }
    {
        LabelSet s;
        s.labels.push_back(box(t, 1, 1, 5, 5));
        const auto l = rasterize_labels(s, 7, 7, t);
        const float want[5][5] = {{0, 0, 0, 0, 0},
                                  {0, 0.5f, 0.5f, 0.5f, 0},
                                  {0, 0.5f, 1, 0.5f, 0},
                                  {0, 0.5f, 0.5f, 0.5f, 0},
                                  {0, 0, 0, 0, 0}};
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) grid_bad += l.distance(r + 1, c + 1) != want[r][c];
    }
    std::mt19937_64 rng(7005);
    int trip_bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 5 + static_cast<int>(rng() % 40), h = 5 + static_cast<int>(rng() % 40);
        const auto g = oracle::random_label_map(rng, w, h, 1 + static_cast<int>(rng() % 8));
        trip_bad += oracle::rasterize_all(polygonize(g, t), w, h, t) != g;
    }
    return verdict(grid_bad == 0 && trip_bad == 0,
                   fmt("3x3/5x5 distance cells wrong=%d; round-trip failures=%d of 100", grid_bad, trip_bad));
}

Outcome chipping_and_split() {
    ProbabilityRaster r;
    r.transform = utm_grid();
    r.p_ext = Grid<float>(1024, 1024);
    r.p_bnd = Grid<float>(1024, 1024);
    std::mt19937_64 rng(7006);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (std::size_t i = 0; i < r.p_ext.size(); ++i) {
        r.p_ext[i] = u(rng);
        r.p_bnd[i] = u(rng);
    }
    const auto chips = chip_raster(r, 256, "s");
    const bool mosaic_ok = chips.size() == 16 && mosaic_chips(chips) == r;

    std::vector<std::string> ids;
    for (int i = 0; i < 200; ++i) ids.push_back(fmt("site_%03d", i));
    const auto a = split_sites(ids, 0.7, 42);
    auto reversed = ids;
    std::reverse(reversed.begin(), reversed.end());
    const auto b = split_sites(reversed, 0.7, 42);
    const bool split_ok = a.train.size() == 140 && a.validation.size() == 60 && a.train == b.train && a.validation == b.validation;
    return verdict(mosaic_ok && split_ok, fmt("chips=%zu mosaic %s; split %zu/%zu, %s", chips.size(),
                                              mosaic_ok ? "bit-exact" : "differs", a.train.size(), a.validation.size(),
                                              split_ok ? "deterministic" : "not deterministic"));
}

Outcome statistics_oracles() {
    std::mt19937_64 rng(7007);
    std::normal_distribution<double> g(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 80);
        std::vector<double> x(n), y(n);
        const double a = g(rng), b = g(rng);
        for (int i = 0; i < n; ++i) {
            x[i] = 0.05 + std::abs(g(rng)) * 0.1;
            y[i] = a + b * x[i] + 0.02 * g(rng);
        }
        const auto f = fit_regression(x, y);
        const auto o = oracle::normal_equations(x, y);
        worst = std::max({worst, std::abs(f.slope - o.slope) / std::max(1.0, std::abs(o.slope)),
                          std::abs(f.intercept - o.intercept) / std::max(1.0, std::abs(o.intercept)), std::abs(f.r2 - o.r2)});
    }

    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(80);
    std::vector<SiteCoord> xy(80);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = u(rng);
        xy[i] = {u(rng) * 1000, u(rng) * 1000};
    }
    const auto m = morans_i(v, xy, 8, 999, 11);
    const double expected = -1.0 / (static_cast<double>(v.size()) - 1);
    const double z = std::abs(m.permutation_mean - expected) / (m.permutation_sd / std::sqrt(999.0));

    const std::vector<double> same{0.1, 0.2, 0.3, 0.4};
    const auto t_same = welch_t_test(same, same);
    const auto t_sep = welch_t_test(std::vector<double>{0, 0, 0, 1}, std::vector<double>{9, 9, 9, 10});

    const bool ok = worst <= 1e-12 && z <= 3.0 && t_same.p_value == 1.0 && t_sep.p_value < 0.001;
    return verdict(ok, fmt("regression max rel. error %.2e; Moran permutation mean %.5f vs %.5f (%.2f SE); "
                           "Welch p(identical)=%.3f p(separated)=%.2e",
                           worst, m.permutation_mean, expected, z, t_same.p_value, t_sep.p_value));
}

Outcome cli_equivalence() {
    oracle::TempDir dir("accept_cli");
    synthetic::FixtureParams fp;
    fp.n_sites = 6;
    fp.sizes = {256, 512};
    fp.seed = 31;
    auto sites = synthetic::make_fixture(fp);
    sites[0].record.split = Split::test;
    for (std::size_t i = 1; i < sites.size(); ++i)
        if (sites[i].record.split == Split::test) sites[i].record.split = Split::unlabeled;
    const auto manifest = synthetic::write_fixture(dir / "data", sites);

    PipelineConfig cfg;
    cfg.manifest_path = manifest;
    cfg.output_dir = dir / "lib";
    cfg.strategies = {"human", "abs_0.925", "abs_0.990", "p99_sem", "p95_sem_ins"};
    std::string strategies;
    for (const auto& s : cfg.strategies) strategies += (strategies.empty() ? "" : ",") + s;

    int stage_diffs = 0;
    std::string first_diff;
    for (auto s : kStages) {
        if (run_stage(s, cfg).exit_code != kExitOk) return {Outcome::fail, "library " + to_string(s) + " failed"};
        for (int w : {1, 4}) {
            const auto out = dir / ("cli_w" + std::to_string(w));
            const int rc = oracle::run_command(std::string(FIELDLABEL_CLI_PATH) + " " + to_string(s) + " --manifest " +
                                               quote(manifest) + " --out " + quote(out) + " --strategy " + strategies +
                                               " --workers " + std::to_string(w) + " > /dev/null 2>&1");
            if (rc != 0) return {Outcome::fail, "CLI " + to_string(s) + " exited " + std::to_string(rc)};
            const auto stage = to_string(s);
            if (oracle::tree_contents(out / stage) != oracle::tree_contents(cfg.output_dir / stage)) {
                ++stage_diffs;
                if (first_diff.empty()) first_diff = " first: " + stage + " W=" + std::to_string(w);
            }
        }
    }
    const bool same_w = oracle::tree_contents(dir / "cli_w1") == oracle::tree_contents(dir / "cli_w4");
    return verdict(stage_diffs == 0 && same_w, fmt("7 stages x W in {1,4}: %d differing stage trees; W=1 vs W=4 %s%s",
                                                   stage_diffs, same_w ? "identical" : "differ", first_diff.c_str()));
}

Outcome human_label_summary() {
    const char* env = std::getenv("FIELDLABEL_HUMAN_LABELS");
    if (!env || !*env) return {Outcome::skip, "set FIELDLABEL_HUMAN_LABELS to a directory of per-site GeoJSON files"};
    const fs::path dir(env);
    if (!fs::is_directory(dir)) return {Outcome::skip, dir.string() + " is not a directory"};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".geojson") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) return {Outcome::skip, "no .geojson files in " + dir.string()};
    std::vector<LabelSet> sets;
    for (const auto& f : files) sets.push_back(label_set_from_features(read_geojson(f), f.stem().string()));
    const auto s = summarize_label_set(sets);
    auto round_to = [](double v, int d) { return std::round(v * std::pow(10.0, d)) / std::pow(10.0, d); };
    const bool ok = s.total_n_fields == 1517 && round_to(s.mean_n_per_site, 2) == 7.74 && s.max_n_per_site == 24 &&
                    s.n_sites_ge5 == 163 && s.n_sites_0 == 4 && round_to(s.mean_ha, 4) == 0.1187 &&
                    round_to(s.median_ha, 4) == 0.0600 && round_to(s.sd_ha, 4) == 0.1642;
    return verdict(ok, fmt("sites=%lld total=%lld mean=%.2f max=%lld >=5:%lld 0:%lld mean_ha=%.4f median_ha=%.4f sd_ha=%.4f",
                           s.n_sites, s.total_n_fields, s.mean_n_per_site, s.max_n_per_site, s.n_sites_ge5, s.n_sites_0,
                           s.mean_ha, s.median_ha, s.sd_ha));
}

}  // namespace

int main() {
    criterion("synthetic-end-to-end", synthetic_end_to_end);
    criterion("watershed-minimax-oracle", watershed_oracle);
    criterion("scoring-median-oracle", scoring_oracle);
    criterion("selection-properties", selection_properties);
    criterion("metric-identities", metric_identities);
    criterion("relative-gain-consistency", relative_gain_consistency);
    criterion("distance-and-polygonize", distance_and_polygonize);
    criterion("chipping-and-split", chipping_and_split);
    criterion("statistics-oracles", statistics_oracles);
    criterion("cli-equivalence", cli_equivalence);
    criterion("human-label-summary", human_label_summary);
    std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
