// SPDX-License-Identifier: Apache-2.0
//
// In-memory interactive sessions: create from a matrix, step (optionally with
// a one-off shift), rewind with branch-on-rewind semantics, and read state.
// Payload field names are documented in protocol.md.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "eigenlab/engine.hpp"
#include "eigenlab/json_io.hpp"
#include "eigenlab/lab.hpp"

namespace eigenlab {

inline constexpr std::size_t kMaxSessionDimension = 8;
inline constexpr std::size_t kMaxStepsPerCall = 1000;
inline constexpr std::size_t kDefaultSessionCapacity = 64;

struct CreateRequest {
  Matrix matrix;
  Algorithm algorithm = Algorithm::QR;
  ShiftStrategy shift;
  bool auto_shift = false;
  double tol = 1e-10;
};

struct StepRequest {
  std::size_t count = 1;
  std::optional<double> mu;
  bool dry_run = false;
  std::optional<Algorithm> algorithm;  // dry runs only
  std::optional<ShiftStrategy> shift;  // replaces the session strategy
};

struct StepResult {
  std::vector<TraceRecord> records;
  /// Metrics of the matrix actually factored at each step (active - mu I):
  /// the pancaked ellipse.
  std::vector<AlignmentMetrics> shifted_metrics;
};

class SessionStore {
 public:
  explicit SessionStore(std::size_t capacity = kDefaultSessionCapacity) : capacity_(capacity) {}

  std::string create(const CreateRequest& req) {
    if (req.matrix.size() > kMaxSessionDimension) {
      throw ValidationError("interactive sessions are limited to n <= " + std::to_string(kMaxSessionDimension));
    }
    RunConfig cfg;
    cfg.algorithm = req.algorithm;
    cfg.shift = req.shift;
    cfg.tol = req.tol;
    cfg.validate();

    SymPsdMatrix m0;
    double mu0 = 0.0;
    if (req.auto_shift) {
      auto shifted = make_psd(req.matrix);
      m0 = std::move(shifted.matrix);
      mu0 = shifted.mu0;
    } else {
      m0 = SymPsdMatrix::validated(req.matrix);
    }

    auto session = std::make_shared<Session>();
    session->config = cfg;
    session->mu0 = mu0;
    session->states.push_back(deflate_if_converged(initial_state(m0, cfg.algorithm), cfg.tol));
    session->history.push_back(initial_record(session->states.back()));

    std::lock_guard lock(mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(++next_id_));
    session->id = id;
    session->last_used = ++clock_;
    if (sessions_.size() >= capacity_) {
      auto victim = std::min_element(sessions_.begin(), sessions_.end(), [](const auto& a, const auto& b) {
        return a.second->last_used < b.second->last_used;
      });
      sessions_.erase(victim);
    }
    sessions_.emplace(session->id, session);
    return session->id;
  }

  /// Applies `count` steps atomically: on error nothing is appended.
  StepResult step(const std::string& id, const StepRequest& req) {
    if (req.count < 1 || req.count > kMaxStepsPerCall) {
      throw ValidationError("count must be in 1.." + std::to_string(kMaxStepsPerCall));
    }
    if (req.algorithm && !req.dry_run) throw ValidationError("algorithm override is only allowed with dryRun");
    if (req.shift && req.dry_run) throw ValidationError("shift changes are not allowed with dryRun");
    if (req.mu && !std::isfinite(*req.mu)) throw ValidationError("mu must be finite");

    auto s = find(id);
    std::lock_guard lock(s->mutex);
    ShiftStrategy strategy = req.shift.value_or(s->config.shift);
    const Algorithm algorithm = req.algorithm.value_or(s->config.algorithm);
    if (req.shift) {
      RunConfig probe = s->config;
      probe.shift = strategy;
      probe.validate();
    }

    IterationState state = s->states.back();
    state.algorithm = algorithm;
    StepResult out;
    std::vector<IterationState> states;
    for (std::size_t i = 0; i < req.count; ++i) {
      const double mu = state.converged() ? 0.0 : req.mu.value_or(select_shift(strategy, state.active));
      out.shifted_metrics.push_back(state.converged() ? AlignmentMetrics{}
                                                      : alignment_metrics(add_identity(state.active, -mu)));
      auto next = advance(state, strategy, s->config.tol, req.mu);
      state = next.state;
      states.push_back(std::move(next.state));
      out.records.push_back(std::move(next.record));
    }
    if (!req.dry_run) {
      if (req.shift) s->config.shift = strategy;
      for (auto& st : states) s->states.push_back(std::move(st));
      s->history.insert(s->history.end(), out.records.begin(), out.records.end());
    }
    return out;
  }

  /// Restores history[k] and drops everything after it.
  void rewind(const std::string& id, std::size_t k) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (k >= s->history.size()) {
      throw IndexOutOfRange("rewind index " + std::to_string(k) + " outside history of length " +
                            std::to_string(s->history.size()));
    }
    s->states.resize(k + 1);
    s->history.resize(k + 1);
  }

  Json state_json(const std::string& id, bool with_history = false) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return payload(*s, with_history);
  }

  std::vector<TraceRecord> history(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->history;
  }

  IterationState current_state(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->states.back();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

  // JSON-level handlers used by the HTTP front end.

  Json handle_create(const Json& body) {
    if (!body.is_object()) throw ValidationError("request body must be a JSON object");
    CreateRequest req;
    if (!body.contains("matrix")) throw ValidationError("missing \"matrix\"");
    const Json& m = body.at("matrix");
    req.matrix = m.is_object() ? matrix_from_json(m) : matrix_from_rows_json(m);
    try {
      if (body.contains("algorithm")) req.algorithm = parse_algorithm(body.at("algorithm").get<std::string>());
      if (body.contains("shift")) req.shift = ShiftStrategy::parse(body.at("shift").get<std::string>());
      req.auto_shift = body.value("autoShift", false);
      req.tol = body.value("tol", req.tol);
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("bad request field: ") + e.what());
    }
    const std::string id = create(req);
    return Json{{"sessionId", id}, {"state", state_json(id)}};
  }

  Json handle_step(const std::string& id, const Json& body) {
    StepRequest req;
    if (!body.is_null() && !body.is_object()) throw ValidationError("request body must be a JSON object");
    try {
      if (body.is_object()) {
        if (body.contains("count")) {
          const auto c = body.at("count").get<long long>();
          if (c < 1) throw ValidationError("count must be >= 1");
          req.count = static_cast<std::size_t>(c);
        }
        if (body.contains("mu") && !body.at("mu").is_null()) req.mu = body.at("mu").get<double>();
        req.dry_run = body.value("dryRun", false);
        if (body.contains("algorithm")) req.algorithm = parse_algorithm(body.at("algorithm").get<std::string>());
        if (body.contains("shift")) req.shift = ShiftStrategy::parse(body.at("shift").get<std::string>());
      }
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("bad request field: ") + e.what());
    }
    const auto result = step(id, req);
    Json records = Json::array();
    Json shifted = Json::array();
    for (const auto& r : result.records) records.push_back(trace_record_json(r));
    for (const auto& m : result.shifted_metrics) shifted.push_back(metrics_json(m));
    return Json{{"records", std::move(records)},
                {"shiftedMetrics", std::move(shifted)},
                {"dryRun", req.dry_run},
                {"state", state_json(id)}};
  }

  Json handle_rewind(const std::string& id, const Json& body) {
    if (!body.is_object() || !body.contains("k") || !body.at("k").is_number_integer()) {
      throw ValidationError("rewind needs an integer \"k\"");
    }
    const auto k = body.at("k").get<long long>();
    if (k < 0) throw IndexOutOfRange("rewind index must be >= 0");
    rewind(id, static_cast<std::size_t>(k));
    return Json{{"state", state_json(id)}};
  }

  static Json metrics_json(const AlignmentMetrics& m) {
    return Json{{"offdiagNorm", m.offdiag_norm},
                {"axisRatio", m.axis_ratio},
                {"eccentricityClass", to_string(m.eccentricity)}};
  }

 private:
  struct Session {
    std::string id;
    RunConfig config;
    double mu0 = 0.0;
    std::vector<IterationState> states;  // states[i] is the state after history[i]
    std::vector<TraceRecord> history;
    std::uint64_t last_used = 0;
    std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession(id);
    it->second->last_used = ++clock_;
    return it->second;
  }

  static Json payload(const Session& s, bool with_history) {
    const IterationState& st = s.states.back();
    const Matrix w = working_matrix(st);
    Json j;
    j["sessionId"] = s.id;
    j["n"] = w.size();
    j["k"] = st.k;
    j["algorithm"] = to_string(s.config.algorithm);
    j["shift"] = s.config.shift.to_string();
    j["tol"] = s.config.tol;
    j["mu0"] = s.mu0;
    j["matrix"] = matrix_rows_json(w);
    j["active"] = st.active.size();
    j["deflations"] = deflations_json(st.deflated);
    j["converged"] = st.converged();

    auto estimates = diagonal_of(w);
    std::sort(estimates.begin(), estimates.end(), std::greater<>());
    for (double& x : estimates) x -= s.mu0;
    j["eigenvalues"] = estimates;

    if (w.size() == 2) {
      const auto v = to_ellipse2d(w);
      j["ellipse"] = Json{{"a", v.a}, {"b", v.b}, {"theta", v.theta}, {"quadrantSign", v.quadrant_sign}};
    } else {
      const auto v = to_ellipsoid(w);
      j["ellipsoid"] = Json{{"axes", v.axes}, {"orientation", matrix_rows_json(v.orientation)}};
    }
    j["metrics"] = metrics_json(alignment_metrics(w));
    j["fixedPointClass"] = to_string(classify_fixed_point(w, s.config.tol));
    j["historyLength"] = s.history.size();
    if (with_history) {
      Json h = Json::array();
      for (const auto& r : s.history) h.push_back(trace_record_json(r));
      j["history"] = std::move(h);
    }
    return j;
  }

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
  std::uint64_t clock_ = 0;
};

inline Json error_json(const std::string& code, const std::string& message) {
  return Json{{"error", Json{{"code", code}, {"message", message}}}};
}

}  // namespace eigenlab
