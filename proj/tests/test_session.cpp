// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "eigenlab/server.hpp"

using namespace eigenlab;

namespace {

const Matrix kWorked = Matrix::from_rows({{1.5, 0.5}, {0.5, 1.5}});

std::string create_worked(SessionStore& store, Algorithm algorithm = Algorithm::QR) {
  CreateRequest req;
  req.matrix = kWorked;
  req.algorithm = algorithm;
  return store.create(req);
}

StepRequest steps(std::size_t count, std::optional<double> mu = std::nullopt) {
  StepRequest r;
  r.count = count;
  r.mu = mu;
  return r;
}

std::string dump_history(SessionStore& store, const std::string& id) {
  std::string out;
  for (const auto& r : store.history(id)) out += trace_record_json(r).dump() + "\n";
  return out;
}

}  // namespace

TEST(SessionCreate, Examples) {
  SessionStore store;
  const std::string id = create_worked(store);
  const Json st = store.state_json(id);
  EXPECT_EQ(st["sessionId"], id);
  EXPECT_EQ(st["n"], 2);
  EXPECT_EQ(st["k"], 0);
  EXPECT_EQ(st["algorithm"], "qr");
  EXPECT_EQ(st["shift"], "none");
  EXPECT_EQ(st["converged"], false);
  EXPECT_EQ(st["historyLength"], 1);
  EXPECT_EQ(st["matrix"], Json::parse("[[1.5,0.5],[0.5,1.5]]"));
  EXPECT_NEAR(st["ellipse"]["theta"].get<double>(), std::numbers::pi / 4, 1e-15);
  EXPECT_EQ(st["ellipse"]["quadrantSign"], 1);
  EXPECT_NEAR(st["metrics"]["offdiagNorm"].get<double>(), 0.707107, 1e-6);
  EXPECT_EQ(st["fixedPointClass"], "NotFixed");

  CreateRequest diag;
  diag.matrix = Matrix::diagonal({2.0, 1.0});
  const Json d = store.state_json(store.create(diag));
  EXPECT_EQ(d["converged"], true);
  EXPECT_EQ(d["fixedPointClass"], "StableDescending");

  CreateRequest bad;
  bad.matrix = Matrix::from_rows({{1, 2}, {3, 4}});
  try {
    store.create(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("not symmetric"), std::string::npos);
  }
}

TEST(SessionCreate, Validation) {
  SessionStore store;
  CreateRequest req;
  req.matrix = Matrix::from_rows({{1, 0}, {0, -3}});
  EXPECT_THROW(store.create(req), ValidationError);
  req.auto_shift = true;
  const Json st = store.state_json(store.create(req));
  EXPECT_EQ(st["mu0"], 3.0);
  EXPECT_EQ(st["eigenvalues"], Json::parse("[1.0,-3.0]"));

  req = {};
  req.matrix = Matrix::identity(9);
  EXPECT_THROW(store.create(req), ValidationError);
  req.matrix = Matrix::identity(8);
  EXPECT_NO_THROW(store.create(req));

  req.algorithm = Algorithm::LR;
  req.shift = ShiftStrategy::wilkinson();
  EXPECT_THROW(store.create(req), ValidationError);
}

TEST(SessionCreate, ThreeByThreeHasEllipsoidView) {
  SessionStore store;
  CreateRequest req;
  req.matrix = Matrix::diagonal({3.0, 2.0, 1.0});
  const Json st = store.state_json(store.create(req));
  EXPECT_FALSE(st.contains("ellipse"));
  EXPECT_EQ(st["ellipsoid"]["axes"], Json::parse("[3.0,2.0,1.0]"));
}

TEST(SessionStep, WorkedExampleOneStep) {
  SessionStore store;
  const std::string id = create_worked(store);
  const auto res = store.step(id, steps(1));
  ASSERT_EQ(res.records.size(), 1u);
  const auto& r = res.records[0];
  EXPECT_EQ(r.k, 1u);
  EXPECT_NEAR(r.matrix(0, 0), 1.8, 1e-12);
  EXPECT_NEAR(r.matrix(0, 1), 0.4, 1e-12);
  EXPECT_NEAR(r.matrix(1, 1), 1.2, 1e-12);
  EXPECT_NEAR(*r.diagnostics.angle2d, 0.463648, 1e-6);
  EXPECT_EQ(store.state_json(id)["historyLength"], 2);
}

TEST(SessionStep, ConvergedSessionOnlyAdvancesK) {
  SessionStore store;
  CreateRequest req;
  req.matrix = Matrix::diagonal({2.0, 1.0});
  const std::string id = store.create(req);
  const auto res = store.step(id, steps(5));
  ASSERT_EQ(res.records.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(res.records[i].k, i + 1);
    EXPECT_EQ(res.records[i].matrix, Matrix::diagonal({2.0, 1.0}));
  }
  EXPECT_EQ(store.state_json(id)["k"], 5);
}

TEST(SessionStep, ShiftAtSmallestEigenvalueShowsAPancake) {
  SessionStore store;
  const std::string id = create_worked(store);
  const auto res = store.step(id, steps(1, 1.0));
  ASSERT_EQ(res.shifted_metrics.size(), 1u);
  EXPECT_EQ(res.shifted_metrics[0].eccentricity, EccentricityClass::Pancake);
  EXPECT_EQ(res.records[0].diagnostics.shift, 1.0);
  // the shifted step aligns a pancake in one step and deflates
  EXPECT_TRUE(store.current_state(id).converged());
  EXPECT_EQ(store.state_json(id)["fixedPointClass"], "StableDescending");
}

TEST(SessionStep, Validation) {
  SessionStore store;
  const std::string id = create_worked(store);
  EXPECT_THROW(store.step(id, steps(0)), ValidationError);
  EXPECT_THROW(store.step(id, steps(1001)), ValidationError);
  EXPECT_NO_THROW(store.step(id, steps(1000)));
  EXPECT_THROW(store.step("s999999", steps(1)), UnknownSession);
  StepRequest r;
  r.algorithm = Algorithm::LR;
  EXPECT_THROW(store.step(id, r), ValidationError);
}

TEST(SessionStep, LrSingularIsReportedAndStateUnchanged) {
  SessionStore store;
  CreateRequest req;
  req.matrix = Matrix::from_rows({{1, 1}, {1, 1}});
  req.algorithm = Algorithm::LR;
  const std::string id = store.create(req);
  const std::string before = store.state_json(id, true).dump();
  EXPECT_THROW(store.step(id, steps(3)), SingularMatrix);
  EXPECT_EQ(store.state_json(id, true).dump(), before);
}

TEST(SessionStep, DryRunDoesNotCommit) {
  SessionStore store;
  const std::string id = create_worked(store);
  StepRequest preview;
  preview.dry_run = true;
  preview.algorithm = Algorithm::LR;
  const auto res = store.step(id, preview);
  EXPECT_NEAR(res.records[0].matrix(0, 0), 5.0 / 3.0, 1e-12);
  EXPECT_EQ(store.state_json(id)["historyLength"], 1);
  EXPECT_EQ(store.state_json(id)["algorithm"], "qr");
}

TEST(SessionStep, ShiftChangePersists) {
  SessionStore store;
  const std::string id = create_worked(store);
  StepRequest r;
  r.shift = ShiftStrategy::wilkinson();
  store.step(id, r);
  EXPECT_EQ(store.state_json(id)["shift"], "wilkinson");
}

TEST(SessionRewind, Examples) {
  SessionStore store;
  const std::string id = create_worked(store);
  store.step(id, steps(3));
  store.rewind(id, 0);
  EXPECT_EQ(store.current_state(id).active.matrix(), kWorked);
  EXPECT_EQ(store.state_json(id)["historyLength"], 1);

  store.step(id, steps(3));
  const auto original = store.history(id);
  store.rewind(id, 1);
  store.step(id, steps(1, 0.9));
  const auto branched = store.history(id);
  ASSERT_EQ(branched.size(), 3u);
  EXPECT_NE(branched[2].matrix, original[2].matrix);
  EXPECT_EQ(branched[1].matrix, original[1].matrix);

  EXPECT_THROW(store.rewind(id, 99), IndexOutOfRange);
  store.rewind(id, 2);
  EXPECT_THROW(store.rewind(id, 3), IndexOutOfRange);
}

TEST(SessionState, Examples) {
  SessionStore store;
  const std::string id = create_worked(store);
  store.step(id, steps(60));
  const Json st = store.state_json(id);
  EXPECT_EQ(st["converged"], true);
  EXPECT_EQ(st["fixedPointClass"], "StableDescending");
  EXPECT_NEAR(st["eigenvalues"][0].get<double>(), 2.0, 1e-9);
  EXPECT_NEAR(st["eigenvalues"][1].get<double>(), 1.0, 1e-9);

  CreateRequest req;
  req.matrix = Matrix::diagonal({1.0, 2.0});
  EXPECT_EQ(store.state_json(store.create(req))["fixedPointClass"], "UnstableOrdering");

  EXPECT_THROW(store.state_json("nope"), UnknownSession);
  EXPECT_EQ(store.state_json(id, true)["history"].size(), 61u);
}

TEST(SessionStore, LruEviction) {
  SessionStore store(3);
  const auto a = create_worked(store);
  const auto b = create_worked(store);
  const auto c = create_worked(store);
  store.state_json(a);  // a is now most recent; b is the oldest
  const auto d = create_worked(store);
  EXPECT_EQ(store.size(), 3u);
  EXPECT_NO_THROW(store.state_json(a));
  EXPECT_THROW(store.state_json(b), UnknownSession);
  EXPECT_NO_THROW(store.state_json(c));
  EXPECT_NO_THROW(store.state_json(d));
  EXPECT_NE(a, b);
}

TEST(SessionProperty, HistoryMatchesCliTrace) {
  Rng rng(55);
  for (const auto& shift : {ShiftStrategy::none(), ShiftStrategy::wilkinson(), ShiftStrategy::gershgorin()}) {
    for (int s = 0; s < 10; ++s) {
      const auto m = sample_gapped_psd({2, 5, 0.9}, rng);
      RunConfig cfg;
      cfg.shift = shift;
      const auto trace = run(m, cfg).trace;

      SessionStore store;
      CreateRequest req;
      req.matrix = m;
      req.shift = shift;
      const std::string id = store.create(req);
      if (trace.size() > 1) store.step(id, steps(trace.size() - 1));
      EXPECT_EQ(dump_history(store, id), trace_to_jsonl(trace));
    }
  }
}

TEST(SessionProperty, ReplayIsByteIdentical) {
  auto script = [](SessionStore& store) {
    const std::string id = create_worked(store);
    store.step(id, steps(5));
    store.rewind(id, 2);
    store.step(id, steps(1, 0.7));
    StepRequest r;
    r.shift = ShiftStrategy::gershgorin();
    r.count = 3;
    store.step(id, r);
    return store.state_json(id, true).dump();
  };
  SessionStore a, b;
  EXPECT_EQ(script(a), script(b));
}

TEST(SessionProperty, ConcurrentSessionsAreIndependent) {
  SessionStore store;
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(create_worked(store));
  std::vector<std::thread> workers;
  for (const auto& id : ids)
    workers.emplace_back([&store, id] {
      for (int i = 0; i < 20; ++i) store.step(id, steps(1));
    });
  for (auto& t : workers) t.join();
  const std::string first = dump_history(store, ids[0]);
  for (const auto& id : ids) EXPECT_EQ(dump_history(store, id), first);
}

// ---- HTTP ----

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<SessionServer>(store_);
    port_ = server_->bind_any("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  std::pair<int, Json> post(const std::string& path, const std::string& body) {
    auto res = client_->Post(path, body, "application/json");
    if (!res) return {0, Json()};
    return {res->status, Json::parse(res->body)};
  }
  std::pair<int, Json> get(const std::string& path) {
    auto res = client_->Get(path);
    if (!res) return {0, Json()};
    return {res->status, Json::parse(res->body)};
  }

  SessionStore store_;
  std::unique_ptr<SessionServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, ScriptedSessionReproducesCliRecords) {
  auto [status, created] = post("/sessions", R"({"matrix": [[1.5,0.5],[0.5,1.5]], "algorithm": "qr", "shift": "none"})");
  ASSERT_EQ(status, 201);
  const std::string id = created["sessionId"];
  EXPECT_EQ(created["state"]["k"], 0);

  auto [s1, stepped] = post("/sessions/" + id + "/step", R"({"count": 5})");
  ASSERT_EQ(s1, 200);
  ASSERT_EQ(stepped["records"].size(), 5u);

  auto [s2, rewound] = post("/sessions/" + id + "/rewind", R"({"k": 2})");
  ASSERT_EQ(s2, 200);
  EXPECT_EQ(rewound["state"]["k"], 2);

  auto [s3, again] = post("/sessions/" + id + "/step", "{}");
  ASSERT_EQ(s3, 200);

  RunConfig cfg;
  const auto trace = run(SymPsdMatrix::validated(kWorked), cfg).trace;
  auto [s4, full] = get("/sessions/" + id + "?history=true");
  ASSERT_EQ(s4, 200);
  const Json& history = full["history"];
  ASSERT_EQ(history.size(), 4u);
  for (std::size_t k = 0; k < history.size(); ++k) EXPECT_EQ(history[k].dump(), trace_record_json(trace[k]).dump());
  EXPECT_EQ(stepped["records"][0].dump(), trace_record_json(trace[1]).dump());
}

TEST_F(HttpTest, MatrixMayBeSentAsAnObject) {
  auto [status, body] = post("/sessions", R"({"matrix": {"n": 2, "data": [[2,0],[0,1]]}})");
  EXPECT_EQ(status, 201);
  EXPECT_EQ(body["state"]["converged"], true);
}

TEST_F(HttpTest, ErrorsMapToStatusCodes) {
  auto [s1, b1] = post("/sessions", "{not json");
  EXPECT_EQ(s1, 400);
  EXPECT_EQ(b1["error"]["code"], "ValidationError");

  auto [s2, b2] = post("/sessions", R"({"matrix": [[1,2],[3,4]]})");
  EXPECT_EQ(s2, 400);
  EXPECT_EQ(b2["error"]["code"], "ValidationError");

  auto [s3, b3] = get("/sessions/s424242");
  EXPECT_EQ(s3, 404);
  EXPECT_EQ(b3["error"]["code"], "UnknownSession");

  auto [s4, b4] = post("/sessions/s424242/step", "{}");
  EXPECT_EQ(s4, 404);

  auto [sc, created] = post("/sessions", R"({"matrix": [[1,1],[1,1]], "algorithm": "lr"})");
  ASSERT_EQ(sc, 201);
  const std::string id = created["sessionId"];
  auto [s5, b5] = post("/sessions/" + id + "/step", R"({"count": 1})");
  EXPECT_EQ(s5, 422);
  EXPECT_EQ(b5["error"]["code"], "SingularMatrix");

  auto [s6, b6] = post("/sessions/" + id + "/rewind", R"({"k": 99})");
  EXPECT_EQ(s6, 400);
  EXPECT_EQ(b6["error"]["code"], "IndexOutOfRange");

  auto [s7, b7] = post("/sessions/" + id + "/step", R"({"count": "three"})");
  EXPECT_EQ(s7, 400);
  EXPECT_EQ(b7["error"]["code"], "ValidationError");

  auto [s8, b8] = post("/sessions/" + id + "/rewind", R"({})");
  EXPECT_EQ(s8, 400);
}

TEST_F(HttpTest, StepResponseCarriesShiftedMetrics) {
  auto [sc, created] = post("/sessions", R"({"matrix": [[1.5,0.5],[0.5,1.5]]})");
  const std::string id = created["sessionId"];
  auto [status, body] = post("/sessions/" + id + "/step", R"({"count": 1, "mu": 1.0, "dryRun": true})");
  ASSERT_EQ(status, 200);
  EXPECT_EQ(body["dryRun"], true);
  EXPECT_EQ(body["shiftedMetrics"][0]["eccentricityClass"], "Pancake");
  EXPECT_EQ(body["state"]["historyLength"], 1);
}
