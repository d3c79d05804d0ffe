#include <gtest/gtest.h>

#include <thread>

#include "fieldlabel/review/service.hpp"
#include "support/oracles.hpp"

using namespace fieldlabel;
using namespace fieldlabel::review;

namespace {

Label candidate(std::int32_t id, double x, LabelClass cls = LabelClass::field) {
    Label l;
    l.geometry = {Polygon{{Ring{{x, 0}, {x + 1, 0}, {x + 1, 1}, {x, 1}}}}};
    l.label_class = cls;
    l.provenance = "pseudo(abs_0.990)";
    l.area_ha = 1e-4;
    l.instance_id = id;
    l.score = InstanceScore{id, 0.995, 0.9, 1};
    return l;
}

SiteRecord record(const std::string& id, Split split, const std::string& date = "2019-07-15") {
    SiteRecord r;
    r.site_id = id;
    r.acquisition_date = parse_date(date);
    r.province = "north";
    r.split = split;
    r.raster_path = id + ".tif";
    return r;
}

// Site a: instances 1..3 under abs_0.990 and 3..4 under p99_sem. Site b: instance 7 under abs_0.990.
std::map<std::string, SiteCandidates> candidates() {
    std::map<std::string, SiteCandidates> m;
    SiteCandidates a;
    a.site = record("a", Split::unlabeled);
    a.by_strategy["abs_0.990"].site_id = "a";
    a.by_strategy["abs_0.990"].labels = {candidate(1, 0), candidate(2, 2), candidate(3, 4, LabelClass::non_cropland)};
    a.by_strategy["p99_sem"].site_id = "a";
    a.by_strategy["p99_sem"].labels = {candidate(3, 4, LabelClass::non_cropland), candidate(4, 6)};
    m.emplace("a", a);
    SiteCandidates b;
    b.site = record("b", Split::test, "2020-01-10");
    b.by_strategy["abs_0.990"].site_id = "b";
    b.by_strategy["abs_0.990"].labels = {candidate(7, 0)};
    m.emplace("b", b);
    return m;
}

ReviewDecision decision(const std::string& site, std::int32_t id, Verdict v, const std::string& who = "r1") {
    ReviewDecision d;
    d.site_id = site;
    d.instance_id = id;
    d.verdict = v;
    d.reviewer = who;
    return d;
}

std::set<std::int32_t> exported_ids(const std::vector<ExportedSite>& e) {
    std::set<std::int32_t> ids;
    for (const auto& s : e)
        for (const auto& l : s.labels.labels) ids.insert(*l.instance_id);
    return ids;
}

}  // namespace

TEST(ReviewStore, PostAndLastWriteWins) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    EXPECT_EQ(store.verdict("a", 1), Verdict::pending);
    const auto first = store.post(decision("a", 1, Verdict::accepted));
    EXPECT_EQ(first.seq, 1);
    EXPECT_FALSE(first.timestamp.empty());
    store.post(decision("a", 1, Verdict::rejected, "r2"));
    EXPECT_EQ(store.verdict("a", 1), Verdict::rejected);
    EXPECT_EQ(store.decisions().at({"a", 1}).reviewer, "r2");
    EXPECT_EQ(store.last_seq(), 2);
    EXPECT_THROW(store.post(decision("a", 99, Verdict::accepted)), NotFound);
    EXPECT_THROW(store.post(decision("zz", 1, Verdict::accepted)), NotFound);
    EXPECT_THROW(parse_verdict("maybe"), UsageError);
}

TEST(ReviewStore, SiteLevelDecisionCoversEveryCandidate) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    EXPECT_EQ(store.decide_site("a", Verdict::accepted, "r1").size(), 4u);
    for (int id : {1, 2, 3, 4}) EXPECT_EQ(store.verdict("a", id), Verdict::accepted);
    EXPECT_EQ(store.decide_site("a", Verdict::rejected, "r1", "p99_sem").size(), 2u);
    EXPECT_EQ(store.verdict("a", 1), Verdict::accepted);
    EXPECT_EQ(store.verdict("a", 4), Verdict::rejected);
    EXPECT_THROW(store.decide_site("a", Verdict::accepted, "r1", "p95_sem_ins"), NotFound);
}

TEST(ReviewStore, ExportPoliciesAndSubsetProperty) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    store.post(decision("a", 1, Verdict::accepted));
    store.post(decision("a", 2, Verdict::rejected));

    const auto strict = store.export_curated("abs_0.990", ExportPolicy::accepted_only);
    const auto loose = store.export_curated("abs_0.990", ExportPolicy::accepted_plus_pending);
    EXPECT_EQ(exported_ids(strict), (std::set<std::int32_t>{1}));
    EXPECT_EQ(exported_ids(loose), (std::set<std::int32_t>{1, 3, 7}));
    const auto s = exported_ids(strict), l = exported_ids(loose);
    EXPECT_TRUE(std::includes(l.begin(), l.end(), s.begin(), s.end()));

    for (const auto& e : loose) {
        ASSERT_TRUE(fs::exists(e.path));
        const auto back = label_set_from_features(read_geojson(e.path), e.site_id);
        EXPECT_EQ(back.labels.size(), e.labels.labels.size());
        for (const auto& lab : back.labels) EXPECT_EQ(lab.provenance, "pseudo+screened(abs_0.990)");
    }
    EXPECT_THROW(store.export_curated("human", ExportPolicy::accepted_only), NotFound);
    EXPECT_THROW(parse_policy("everything"), UsageError);
}

TEST(ReviewStore, ExportIsSubsetUnderRandomDecisions) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    std::mt19937_64 rng(8);
    const std::vector<std::pair<std::string, int>> keys{{"a", 1}, {"a", 2}, {"a", 3}, {"a", 4}, {"b", 7}};
    for (int round = 0; round < 30; ++round) {
        const auto& [site, id] = keys[rng() % keys.size()];
        store.post(decision(site, id, static_cast<Verdict>(rng() % 3)));
        for (const auto* strat : {"abs_0.990", "p99_sem"}) {
            const auto s = exported_ids(store.export_curated(strat, ExportPolicy::accepted_only));
            const auto l = exported_ids(store.export_curated(strat, ExportPolicy::accepted_plus_pending));
            EXPECT_TRUE(std::includes(l.begin(), l.end(), s.begin(), s.end()));
            for (auto i : s) EXPECT_EQ(store.verdict(i == 7 ? "b" : "a", i), Verdict::accepted);
            for (auto i : l) EXPECT_NE(store.verdict(i == 7 ? "b" : "a", i), Verdict::rejected);
        }
    }
}

TEST(ReviewStore, ReplayAfterReopen) {
    oracle::TempDir dir("review");
    std::map<std::pair<std::string, std::int32_t>, ReviewDecision> before;
    {
        ReviewStore store(dir.path(), candidates());
        store.post(decision("a", 1, Verdict::accepted));
        store.post(decision("a", 2, Verdict::rejected));
        store.post(decision("a", 1, Verdict::pending));
        before = store.decisions();
    }
    ReviewStore reopened(dir.path(), candidates());
    EXPECT_EQ(reopened.decisions(), before);
    EXPECT_EQ(reopened.last_seq(), 3);
    EXPECT_EQ(reopened.post(decision("b", 7, Verdict::accepted)).seq, 4);
}

TEST(ReviewStore, CompactionPreservesState) {
    oracle::TempDir dir("review");
    std::map<std::pair<std::string, std::int32_t>, ReviewDecision> before;
    {
        ReviewStore store(dir.path(), candidates(), 3);
        for (int i = 0; i < 7; ++i) store.post(decision("a", 1 + i % 4, i % 2 ? Verdict::accepted : Verdict::rejected));
        EXPECT_TRUE(fs::exists(store.snapshot_path()));
        before = store.decisions();
    }
    ReviewStore reopened(dir.path(), candidates(), 3);
    EXPECT_EQ(reopened.decisions(), before);
    EXPECT_EQ(reopened.last_seq(), 7);

    reopened.compact();
    EXPECT_EQ(oracle::slurp(reopened.log_path()), "");
    ReviewStore again(dir.path(), candidates());
    EXPECT_EQ(again.decisions(), before);
}

TEST(ReviewStore, LogEntriesCoveredBySnapshotAreSkipped) {
    oracle::TempDir dir("review");
    std::string log_copy;
    {
        ReviewStore store(dir.path(), candidates(), 1000);
        store.post(decision("a", 1, Verdict::accepted));
        store.post(decision("a", 1, Verdict::rejected));
        log_copy = oracle::slurp(store.log_path());
        store.compact();
    }
    // Simulate a crash after the snapshot was written but before the log was truncated.
    write_file_atomic(dir / "decisions.log", log_copy);
    ReviewStore reopened(dir.path(), candidates());
    EXPECT_EQ(reopened.verdict("a", 1), Verdict::rejected);
    EXPECT_EQ(reopened.last_seq(), 2);
}

TEST(ReviewStore, TornFinalLineIsDropped) {
    oracle::TempDir dir("review");
    {
        ReviewStore store(dir.path(), candidates());
        store.post(decision("a", 1, Verdict::accepted));
        store.post(decision("a", 2, Verdict::accepted));
    }
    {
        std::ofstream log(dir / "decisions.log", std::ios::app | std::ios::binary);
        log << R"({"seq":3,"site_id":"a","instance_id":3,"verd)";
    }
    ReviewStore reopened(dir.path(), candidates());
    EXPECT_EQ(reopened.last_seq(), 2);
    EXPECT_EQ(reopened.verdict("a", 3), Verdict::pending);
    EXPECT_EQ(reopened.post(decision("a", 3, Verdict::rejected)).seq, 3);
    ReviewStore third(dir.path(), candidates());
    EXPECT_EQ(third.verdict("a", 3), Verdict::rejected);
}

TEST(ReviewStore, CorruptMiddleLineIsAnError) {
    oracle::TempDir dir("review");
    {
        ReviewStore store(dir.path(), candidates());
        store.post(decision("a", 1, Verdict::accepted));
    }
    auto text = oracle::slurp(dir / "decisions.log");
    write_file_atomic(dir / "decisions.log", "garbage\n" + text);
    EXPECT_THROW(ReviewStore(dir.path(), candidates()), DataError);
}

TEST(ReviewStore, ConcurrentWritersNeverLoseDecisions) {
    oracle::TempDir dir("review");
    constexpr int kThreads = 8, kEach = 50;
    {
        ReviewStore store(dir.path(), candidates(), 37);
        std::vector<std::thread> threads;
        for (int t = 0; t < kThreads; ++t) {
            threads.emplace_back([&store, t] {
                for (int i = 0; i < kEach; ++i) {
                    store.post(decision("a", 1 + (t + i) % 4, (t + i) % 2 ? Verdict::accepted : Verdict::rejected,
                                        "r" + std::to_string(t)));
                    (void)store.list_sites();
                }
            });
        }
        for (auto& th : threads) th.join();
        EXPECT_EQ(store.last_seq(), kThreads * kEach);
    }
    // Every log line must parse on its own; interleaved writes would break replay.
    ReviewStore reopened(dir.path(), candidates());
    EXPECT_EQ(reopened.last_seq(), kThreads * kEach);
    for (const auto& [key, d] : reopened.decisions()) EXPECT_GT(d.seq, kThreads * kEach - 8);
}

TEST(ReviewStore, SiteFilters) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    EXPECT_EQ(store.list_sites().size(), 2u);
    SiteFilter by_split;
    by_split.split = Split::test;
    ASSERT_EQ(store.list_sites(by_split).size(), 1u);
    EXPECT_EQ(store.list_sites(by_split)[0].site_id, "b");
    EXPECT_EQ(store.list_sites(by_split)[0].season, Season::wet);

    SiteFilter by_strategy;
    by_strategy.strategy = "p99_sem";
    const auto p99 = store.list_sites(by_strategy);
    ASSERT_EQ(p99.size(), 1u);
    EXPECT_EQ(p99[0].n_candidates, 2u);

    store.post(decision("b", 7, Verdict::accepted));
    SiteFilter pending, reviewed;
    pending.status = "pending";
    reviewed.status = "reviewed";
    ASSERT_EQ(store.list_sites(pending).size(), 1u);
    EXPECT_EQ(store.list_sites(pending)[0].site_id, "a");
    ASSERT_EQ(store.list_sites(reviewed).size(), 1u);
    EXPECT_EQ(store.list_sites(reviewed)[0].n_reviewed, 1u);
    SiteFilter bad;
    bad.status = "done";
    EXPECT_THROW(store.list_sites(bad), UsageError);
}

TEST(ReviewStore, SitePayloadMergesStrategies) {
    oracle::TempDir dir("review");
    ReviewStore store(dir.path(), candidates());
    store.post(decision("a", 3, Verdict::rejected));
    const auto all = store.site_payload("a");
    EXPECT_EQ(all["candidates"]["features"].size(), 4u);
    const auto p99 = store.site_payload("a", "p99_sem");
    ASSERT_EQ(p99["candidates"]["features"].size(), 2u);
    EXPECT_EQ(p99["candidates"]["features"][0]["properties"]["verdict"], "rejected");
    EXPECT_EQ(p99["decisions"].size(), 1u);
    EXPECT_TRUE(all["image"].is_null());
    EXPECT_THROW(store.site_payload("nope"), NotFound);
}

TEST(ReviewStore, LoadsCandidatesFromSelectOutputs) {
    oracle::TempDir dir("review");
    LabelSet set;
    set.site_id = "a";
    set.labels = {candidate(1, 0), candidate(2, 2)};
    write_file_atomic(dir / "select" / "a" / "abs_0.990.geojson", dump_label_set(set));
    write_file_atomic(dir / "select" / "a" / "abs_0.990.csv", "ignored");
    const auto c = load_candidates(dir / "select", {record("a", Split::unlabeled), record("b", Split::unlabeled)});
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.at("a").instance_ids(), (std::set<std::int32_t>{1, 2}));
    EXPECT_TRUE(c.at("b").by_strategy.empty());
}

class ReviewHttp : public ::testing::Test {
protected:
    void SetUp() override {
        store_ = std::make_unique<ReviewStore>(dir_.path() / "store", candidates());
        write_file_atomic(dir_ / "images" / "a.png", std::string("\x89PNG fake", 9));
        install_routes(server_, *store_, dir_ / "images");
        port_ = server_.bind_to_any_port("127.0.0.1");
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    void TearDown() override {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    nlohmann::json get(const std::string& path, int expect = 200) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res);
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << ": " << res->body;
        return res->get_header_value("Content-Type") == "application/json" ? nlohmann::json::parse(res->body) : nlohmann::json{};
    }
    nlohmann::json post(const std::string& body, int expect = 200) {
        auto res = client_->Post("/decisions", body, "application/json");
        EXPECT_TRUE(res);
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << body << ": " << res->body;
        return nlohmann::json::parse(res->body);
    }

    oracle::TempDir dir_{"review_http"};
    std::unique_ptr<ReviewStore> store_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::unique_ptr<httplib::Client> client_;
};

TEST_F(ReviewHttp, ListsAndFiltersSites) {
    EXPECT_EQ(get("/sites")["sites"].size(), 2u);
    const auto test_only = get("/sites?split=test");
    ASSERT_EQ(test_only["sites"].size(), 1u);
    EXPECT_EQ(test_only["sites"][0]["site_id"], "b");
    EXPECT_EQ(get("/sites?strategy=p99_sem")["sites"].size(), 1u);
    EXPECT_TRUE(get("/sites?split=holdout", 400).contains("error"));
    get("/sites?status=finished", 400);
}

TEST_F(ReviewHttp, SiteDetailImageAndNotFound) {
    const auto a = get("/sites/a?strategy=abs_0.990");
    EXPECT_EQ(a["candidates"]["features"].size(), 3u);
    EXPECT_EQ(a["image"], "/sites/a/image.png");
    EXPECT_EQ(a["season"], "dry");
    auto img = client_->Get("/sites/a/image.png");
    ASSERT_TRUE(img);
    EXPECT_EQ(img->status, 200);
    EXPECT_EQ(img->body.substr(0, 4), "\x89PNG");
    get("/sites/b/image.png", 404);
    get("/sites/missing", 404);
    get("/sites/a?strategy=nope", 404);
}

TEST_F(ReviewHttp, DecisionsAndExport) {
    const auto one = post(R"({"site_id":"a","instance_id":1,"verdict":"accepted","reviewer":"r1"})");
    EXPECT_EQ(one["seq"], 1);
    EXPECT_EQ(one["verdict"], "accepted");
    post(R"({"site_id":"a","instance_id":1,"verdict":"fine"})", 400);
    post(R"({"site_id":"a","instance_id":42,"verdict":"accepted"})", 404);
    post(R"({"site_id":"a","verdict":"accepted"})", 400);
    post("{not json", 400);
    post(R"({"site_id":"a","all":"pending"})", 400);
    const auto all = post(R"({"site_id":"b","all":"rejected","reviewer":"r2"})");
    EXPECT_EQ(all["decisions"].size(), 1u);
    EXPECT_EQ(store_->verdict("b", 7), Verdict::rejected);

    const auto strict = get("/export?strategy=abs_0.990");
    EXPECT_EQ(strict["policy"], "accepted_only");
    EXPECT_EQ(strict["total"], 1);
    const auto loose = get("/export?strategy=abs_0.990&policy=accepted_plus_pending");
    EXPECT_EQ(loose["total"], 3);  // 1 accepted plus pending 2 and 3; b's only candidate is rejected
    get("/export", 400);
    get("/export?strategy=abs_0.990&policy=all", 400);
    get("/export?strategy=human", 404);
}
