#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "folde/service/http.hpp"
#include "folde/sim/landscape.hpp"
#include "support.hpp"

using namespace folde;
using namespace folde::service;

namespace {

// A small landscape written to disk as campaign artifacts.
struct Fixture {
    folde::testing::TempDir dir{"svc"};
    SyntheticLandscape land;
    std::string embeddings, logprobs, truth;

    explicit Fixture(std::uint64_t seed = 5) : land(make(seed)) {
        embeddings = dir.file("emb.flde");
        logprobs = dir.file("lp.tsv");
        truth = dir.file("truth.tsv");
        save_embeddings(embeddings, land.embeddings);
        save_logprobs(logprobs, land.logprobs);
        save_dataset(truth, land.dataset);
    }

    static SyntheticLandscape make(std::uint64_t seed) {
        SynthConfig c;
        c.length = 8;
        c.seed = seed;
        return synth_landscape(c);
    }

    CreateRequest request(const std::string& id, CampaignConfig cfg = small_config()) const {
        CreateRequest r;
        r.id = id;
        r.embeddings = embeddings;
        r.logprobs = logprobs;
        r.ground_truth = truth;
        r.config = cfg;
        return r;
    }

    static CampaignConfig small_config() {
        CampaignConfig c;
        c.batch_size = 8;
        c.ensemble_members = 2;
        c.seed = 3;
        return c;
    }

    std::vector<MeasurementInput> measure(const LiveRound& r, std::size_t count) const {
        std::vector<MeasurementInput> out;
        for (std::size_t k = 0; k < std::min(count, r.proposal.size()); ++k) {
            const auto& v = r.proposal[k].variant;
            out.push_back({render(v), land.dataset[*land.dataset.find(v)].activity});
        }
        return out;
    }
};

CampaignState sample_state() {
    CampaignState s;
    s.id = "abc_1";
    s.reference = "ACDEF";
    s.embeddings_path = "/x/e.flde";
    s.logprobs_path = "/x/l.tsv";
    s.config.alpha_schedule = {1.0, 2.5};
    s.config.per_locus_cap = std::nullopt;
    s.config.max_rounds = 4;
    s.config.seed = 99;
    LiveRound r;
    r.round = 1;
    r.proposal.push_back({parse_variant_text("A1C"), -0.25, std::nullopt, std::nullopt});
    r.proposal.push_back({parse_variant_text("C2D:E4F"), 0.125, 1.5, 2.75});
    r.measurements.push_back({parse_variant_text("A1C"), 3.0});
    r.measurements.push_back({parse_variant_text("C2D:E4F"), std::nullopt});
    r.measured = true;
    s.rounds.push_back(r);
    LiveRound r2;
    r2.round = 2;
    r2.alpha = 1.0;
    r2.proposal.push_back({parse_variant_text("D3K"), 0.1 + 0.2, 0.3, 1.0 / 3.0});
    s.rounds.push_back(r2);
    s.status = Status::awaiting_measurements;
    return s;
}

}  // namespace

// ---- state and store ---------------------------------------------------------

TEST(State, JsonRoundTrip) {
    const auto s = sample_state();
    EXPECT_EQ(state_from_json(to_json(s)), s);
    EXPECT_EQ(state_from_json(json::parse(to_json(s).dump(2))), s);
}

TEST(State, StoreRoundTripAndList) {
    folde::testing::TempDir dir("store");
    Store store(dir.path());
    const auto s = sample_state();
    store.save(s);
    EXPECT_EQ(store.load(s.id), s);
    EXPECT_EQ(store.list(), (std::vector<std::string>{"abc_1"}));
    EXPECT_EQ(store.next_free_id(), "campaign-1");
    EXPECT_THROW(store.load("missing"), NotFound);
    EXPECT_THROW(store.load("../etc"), ParseError);
    EXPECT_FALSE(std::filesystem::exists(store.state_path(s.id).string() + ".tmp"));
}

TEST(State, CorruptFileReported) {
    folde::testing::TempDir dir("corrupt");
    Store store(dir.path());
    std::ofstream(store.state_path("bad")) << "{not json";
    EXPECT_THROW(store.load("bad"), ParseError);
}

TEST(State, DataDirFromEnvironment) {
    ::setenv(kDataDirEnv, "/tmp/folde-env-dir", 1);
    EXPECT_EQ(resolve_data_dir(), std::filesystem::path("/tmp/folde-env-dir"));
    EXPECT_EQ(resolve_data_dir("/explicit"), std::filesystem::path("/explicit"));
    ::unsetenv(kDataDirEnv);
}

TEST(State, ConfigValidation) {
    CampaignConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.per_locus_cap, std::optional<std::size_t>(3));
    c.ensemble_members = 1;
    EXPECT_THROW(c.validate(), InvariantError);
    c = {};
    c.alpha_schedule = {-1.0};
    EXPECT_THROW(c.validate(), InvariantError);
    EXPECT_FALSE(valid_campaign_id(""));
    EXPECT_FALSE(valid_campaign_id("a/b"));
    EXPECT_TRUE(valid_campaign_id("run-7_b"));
}

// ---- campaign lifecycle ---------------------------------------------------------

TEST(Service, FirstRoundIsCappedZeroShot) {
    Fixture fx;
    CampaignService svc(fx.dir.path() / "data");
    svc.create(fx.request("c1"));
    const auto r1 = svc.propose("c1");
    ASSERT_EQ(r1.proposal.size(), 8u);
    std::vector<Variant> got;
    for (const auto& p : r1.proposal) got.push_back(p.variant);
    const auto singles = all_single_mutants(fx.land.dataset.reference());
    EXPECT_EQ(got, zero_shot_select(singles, fx.land.logprobs, fx.land.dataset.reference(), 8, 3));
    EXPECT_EQ(svc.get("c1").status, Status::awaiting_measurements);
    EXPECT_THROW(svc.propose("c1"), StateError);
}

TEST(Service, RecordStateMachine) {
    Fixture fx;
    CampaignService svc(fx.dir.path() / "data");
    svc.create(fx.request("c2"));
    EXPECT_THROW(svc.record("c2", {}), StateError);
    const auto r1 = svc.propose("c2");
    const std::vector<MeasurementInput> unknown{{"A1C", 1.0}};
    bool in_batch = false;
    for (const auto& p : r1.proposal) in_batch |= render(p.variant) == "A1C";
    if (!in_batch) {
        EXPECT_THROW(svc.record("c2", unknown), InvariantError);
    }
    auto all = fx.measure(r1, 8);
    auto dup = all;
    dup.push_back(all[0]);
    EXPECT_THROW(svc.record("c2", dup), InvariantError);
    const std::vector<MeasurementInput> bad{{"not-a-variant", 1.0}};
    EXPECT_THROW(svc.record("c2", bad), ParseError);
    EXPECT_EQ(svc.get("c2").status, Status::awaiting_measurements);  // failed calls change nothing
    const auto s = svc.record("c2", all);
    EXPECT_EQ(s.status, Status::ready_to_propose);
    EXPECT_THROW(svc.record("c2", all), StateError);
    EXPECT_THROW(svc.create(fx.request("c2")), StateError);
}

TEST(Service, PartialMeasurementsMarkFailed) {
    Fixture fx;
    CampaignService svc(fx.dir.path() / "data");
    svc.create(fx.request("c3"));
    const auto r1 = svc.propose("c3");
    const auto s = svc.record("c3", fx.measure(r1, 6));
    const auto& m = s.rounds[0].measurements;
    ASSERT_EQ(m.size(), 8u);
    std::size_t failed = 0;
    for (const auto& x : m) failed += !x.activity.has_value();
    EXPECT_EQ(failed, 2u);
    EXPECT_EQ(measured_records(s)[0].size(), 6u);
    const auto metrics = svc.metrics("c3");
    EXPECT_EQ(metrics["rounds"][0]["failed"], 2);
    EXPECT_EQ(metrics["rounds"][0]["measured"], 6);

    // Failed variants are never proposed again.
    const auto r2 = svc.propose("c3");
    for (const auto& p : r2.proposal)
        for (const auto& old : r1.proposal) EXPECT_NE(p.variant, old.variant);
}

namespace {

// Round-2 proposal for a campaign whose round 1 was fully measured.
std::pair<LiveRound, LivePlan> exploit_round(const Fixture& fx, const std::string& id, double alpha) {
    CampaignService svc(fx.dir.path() / "data");
    auto cfg = Fixture::small_config();
    cfg.alpha_schedule = {alpha};
    cfg.ensemble_members = 5;  // two members give a rank-one covariance
    svc.create(fx.request(id, cfg));
    svc.record(id, fx.measure(svc.propose(id), 8));
    const auto before = svc.get(id);
    auto plan = plan_live_round(before, load_artifacts(before));
    const auto again = plan_live_round(before, load_artifacts(before));
    EXPECT_EQ(plan.consensus, again.consensus);
    return {svc.propose(id), std::move(plan)};
}

}  // namespace

TEST(Service, LaterRoundFollowsSelector) {
    Fixture fx;
    const auto [r2, plan] = exploit_round(fx, "c4", 100.0);
    EXPECT_EQ(r2.alpha, std::optional<double>(100.0));
    const auto picks = constant_liar_select(plan.consensus, plan.cov, 8, 100.0, 1.0);
    ASSERT_EQ(r2.proposal.size(), 8u);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(r2.proposal[k].variant, plan.candidates[picks[k]]);
        EXPECT_DOUBLE_EQ(*r2.proposal[k].consensus, plan.consensus(Eigen::Index(picks[k])));
    }
    // The leading picks are the top of the UCB order.
    const auto top = top_n_select(ucb_score(plan.consensus, plan.cov, 1.0), 8);
    EXPECT_EQ(picks[0], top[0]);
}

TEST(Service, HugeAlphaEqualsTopUcb) {
    Fixture fx;
    const auto [r2, plan] = exploit_round(fx, "c6", 1e9);
    const auto top = top_n_select(ucb_score(plan.consensus, plan.cov, 1.0), 8);
    ASSERT_EQ(r2.proposal.size(), 8u);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(r2.proposal[k].variant, plan.candidates[top[k]]);
}

TEST(Service, ReproducibleAndRestartSafe) {
    Fixture fx;
    const auto data = fx.dir.path() / "data";
    std::vector<MeasurementInput> m1;
    {
        CampaignService svc(data);
        svc.create(fx.request("a"));
        svc.create(fx.request("b"));
        const auto ra = svc.propose("a");
        const auto rb = svc.propose("b");
        EXPECT_EQ(ra.proposal, rb.proposal);
        m1 = fx.measure(ra, 8);
        svc.record("a", m1);
    }
    // A fresh service over the same directory picks up where the last stopped.
    CampaignService svc(data);
    EXPECT_EQ(svc.get("b").status, Status::awaiting_measurements);
    svc.record("b", m1);
    const auto a2 = svc.propose("a");
    const auto b2 = svc.propose("b");
    EXPECT_EQ(a2.proposal, b2.proposal);
    EXPECT_EQ(svc.get("a").rounds, svc.get("b").rounds);
}

TEST(Service, MaxRoundsCompletes) {
    Fixture fx;
    CampaignService svc(fx.dir.path() / "data");
    auto cfg = Fixture::small_config();
    cfg.max_rounds = 1;
    svc.create(fx.request("c5", cfg));
    const auto s = svc.record("c5", fx.measure(svc.propose("c5"), 8));
    EXPECT_EQ(s.status, Status::complete);
    EXPECT_THROW(svc.propose("c5"), StateError);
    const auto metrics = svc.metrics("c5");
    EXPECT_EQ(metrics["status"], "complete");
    EXPECT_TRUE(metrics["rounds"][0].contains("cumulative_hits"));
}

TEST(Service, CreateValidation) {
    Fixture fx;
    CampaignService svc(fx.dir.path() / "data");
    auto r = fx.request("x");
    r.embeddings.clear();
    EXPECT_THROW(svc.create(r), ParseError);
    r = fx.request("bad id");
    EXPECT_THROW(svc.create(r), ParseError);
    r = fx.request("y");
    r.ground_truth.clear();
    EXPECT_THROW(svc.create(r), ParseError);  // no reference to fall back on
    r.reference = fx.land.dataset.reference();
    EXPECT_NO_THROW(svc.create(r));
    const auto auto_id = svc.create(fx.request(""));
    EXPECT_EQ(auto_id.id, "campaign-1");
}

// ---- HTTP -------------------------------------------------------------------------

class Http : public ::testing::Test {
protected:
    void SetUp() override {
        svc_ = std::make_unique<CampaignService>(fx_.dir.path() / "data");
        install_routes(server_, *svc_);
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

    httplib::Result post(const std::string& path, const json& body) {
        return client_->Post(path, body.dump(), "application/json");
    }

    Fixture fx_;
    std::unique_ptr<CampaignService> svc_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::unique_ptr<httplib::Client> client_;
};

TEST_F(Http, FullRound) {
    auto res = client_->Get("/campaigns");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["campaigns"], json::array());
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

    res = post("/campaigns", {{"id", "h1"},
                              {"embeddings", fx_.embeddings},
                              {"logprobs", fx_.logprobs},
                              {"ground_truth", fx_.truth},
                              {"config", {{"batch_size", 8}, {"ensemble_members", 2}, {"seed", 3}}}});
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 201) << res->body;
    EXPECT_EQ(json::parse(res->body)["status"], "ready_to_propose");

    res = client_->Get("/campaigns/h1");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["id"], "h1");

    res = post("/campaigns/h1/propose", json::object());
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto round = json::parse(res->body);
    EXPECT_EQ(round["round"], 1);
    ASSERT_EQ(round["proposal"].size(), 8u);

    res = post("/campaigns/h1/propose", json::object());
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 409);

    json ms = json::array();
    for (const auto& p : round["proposal"]) {
        const auto v = parse_variant_text(p["variant"].get<std::string>());
        ms.push_back({{"variant", p["variant"]}, {"activity", fx_.land.dataset[*fx_.land.dataset.find(v)].activity}});
    }
    ms.back()["activity"] = nullptr;
    res = post("/campaigns/h1/measurements", {{"measurements", ms}});
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(json::parse(res->body)["status"], "ready_to_propose");

    res = client_->Get("/campaigns/h1/metrics");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    const auto metrics = json::parse(res->body);
    EXPECT_EQ(metrics["rounds"][0]["failed"], 1);
    EXPECT_TRUE(metrics["ground_truth"].get<bool>());

    res = client_->Get("/campaigns");
    EXPECT_EQ(json::parse(res->body)["campaigns"], json::array({"h1"}));
}

TEST_F(Http, ErrorCodes) {
    auto res = client_->Get("/campaigns/nope");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
    res = client_->Get("/campaigns/nope/metrics");
    EXPECT_EQ(res->status, 404);
    res = client_->Post("/campaigns", "{oops", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    res = post("/campaigns", {{"id", "h2"}, {"logprobs", fx_.logprobs}});
    EXPECT_EQ(res->status, 400);
    res = post("/campaigns", {{"id", "h2"}, {"embeddings", fx_.embeddings}, {"logprobs", fx_.logprobs},
                              {"ground_truth", fx_.truth}});
    EXPECT_EQ(res->status, 201);
    res = post("/campaigns/h2/measurements", {{"measurements", json::array()}});
    EXPECT_EQ(res->status, 409);
    res = post("/campaigns/h2/propose", json::object());
    EXPECT_EQ(res->status, 200);
    res = post("/campaigns/h2/measurements", {{"wrong", 1}});
    EXPECT_EQ(res->status, 400);
    res = client_->Options("/campaigns");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 204);
}
