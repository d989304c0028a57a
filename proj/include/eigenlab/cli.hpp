// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind tools/eigenlab. Each returns the process
// exit code and writes human output to `out`, diagnostics to `err`.
#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eigenlab/engine.hpp"
#include "eigenlab/json_io.hpp"
#include "eigenlab/lab.hpp"
#include "eigenlab/svg.hpp"

namespace eigenlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitMaxIters = 2;

struct RunOptions {
  std::string matrix_path;
  std::string algo = "qr";
  std::string shift = "none";
  double tol = 1e-10;
  std::size_t max_iters = 10000;
  std::size_t trace_every = 1;
  std::string trace_path;  // empty: no trace file
  bool make_psd = false;
};

struct VerifyOptions {
  std::string observations = "all";
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::string algo = "qr";
  std::string out_path;
};

struct AuditOptions {
  std::string algo = "qr";
  std::string shift = "none";
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  std::string out_path;
};

struct RenderOptions {
  std::string trace_path;
  std::string out_dir;
  std::string overlay = "input";
};

/// Terminal summaries only; traces and reports keep every bit.
inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

namespace detail {

inline void print_spectrum(std::ostream& out, const SpectralDecomp& sd) {
  out << "eigenvalues:";
  for (double x : sd.eigenvalues) out << ' ' << fmt_g(x);
  out << "\neigenvectors (columns):\n";
  for (std::size_t r = 0; r < sd.eigenvectors.size(); ++r) {
    out << ' ';
    for (double x : sd.eigenvectors.row(r)) out << ' ' << fmt_g(x);
    out << '\n';
  }
}

/// "all" or a comma separated list of ids in 1..10.
inline std::vector<int> parse_observation_ids(const std::string& spec) {
  if (spec == "all") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> ids;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || id < 1 || id > 10) {
      throw ValidationError("--observations expects 'all' or ids in 1..10, got '" + item + "'");
    }
    ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("--observations is empty");
  return ids;
}

inline std::vector<std::string> parse_overlays(const std::string& spec) {
  std::vector<std::string> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item != "input" && item != "qr" && item != "lr") {
      throw ValidationError("unknown overlay '" + item + "' (expected input, qr, lr)");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ValidationError("--overlay is empty");
  return out;
}

}  // namespace detail

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  SymPsdMatrix m0;
  double mu0 = 0.0;
  try {
    cfg.algorithm = parse_algorithm(opt.algo);
    cfg.shift = ShiftStrategy::parse(opt.shift);
    cfg.tol = opt.tol;
    cfg.max_iters = opt.max_iters;
    cfg.trace_every = opt.trace_every;
    cfg.validate();
    const Matrix m = read_matrix_file(opt.matrix_path);
    if (opt.make_psd) {
      auto shifted = make_psd(m);
      m0 = std::move(shifted.matrix);
      mu0 = shifted.mu0;
    } else {
      m0 = SymPsdMatrix::validated(m);
    }
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    const RunResult res = run(m0, cfg);
    if (!opt.trace_path.empty()) write_file(opt.trace_path, trace_to_jsonl(res.trace));
    out << "converged after " << res.final_state.k << " iterations (" << to_string(cfg.algorithm) << ", shift "
        << cfg.shift.to_string() << ")\n";
    if (mu0 != 0.0) out << "make_psd offset mu0 = " << fmt_g(mu0) << " (subtracted)\n";
    detail::print_spectrum(out, reconstruct_eigensystem(res.final_state, mu0));
    return kExitOk;
  } catch (const MaxItersExceeded& e) {
    if (!opt.trace_path.empty()) write_file(opt.trace_path, trace_to_jsonl(e.partial().trace));
    err << "error: MaxItersExceeded: " << e.what() << '\n';
    return kExitMaxIters;
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
    return kExitInputError;
  }
}

inline int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<int> ids;
  Algorithm algorithm;
  try {
    ids = detail::parse_observation_ids(opt.observations);
    algorithm = parse_algorithm(opt.algo);
    if (opt.samples < 1) throw ValidationError("--samples must be >= 1");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  bool all_passed = true;
  Json reports = Json::array();
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-8s %-10s %-6s %s\n", "obs", "samples", "violations", "result", "predicate");
  out << line;
  for (int id : ids) {
    const auto r = check_observation(id, algorithm, opt.seed, opt.samples);
    all_passed = all_passed && r.passed;
    std::snprintf(line, sizeof line, "%-4d %-8zu %-10zu %-6s %s\n", id, r.samples_tested, r.violations.size(),
                  r.passed ? "PASS" : "FAIL", r.predicate.c_str());
    out << line;
    reports.push_back(observation_report_json(r));
  }
  if (!opt.out_path.empty()) {
    write_file(opt.out_path, Json{{"algorithm", to_string(algorithm)}, {"seed", opt.seed}, {"reports", reports}}.dump(2) + "\n");
  }
  return all_passed ? kExitOk : kExitInputError;
}

inline int cmd_audit(const AuditOptions& opt, std::ostream& out, std::ostream& err) {
  StepMap f;
  try {
    f.algorithm = parse_algorithm(opt.algo);
    f.shift = ShiftStrategy::parse(opt.shift);
    f.run_config().validate();
    if (opt.samples < 1) throw ValidationError("--samples must be >= 1");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  const auto audit = axiom_audit(f, SamplerSpec{}, opt.samples, opt.seed);
  out << "axiom audit for " << audit.step << " over " << audit.samples << " samples\n";
  for (const auto& a : audit.axioms) {
    char line[200];
    std::snprintf(line, sizeof line, "  axiom %d: %-4s (%zu/%zu failed)  %s\n", a.axiom, a.passed() ? "PASS" : "FAIL",
                  a.failures, a.tested, a.description.c_str());
    out << line;
    if (!a.witnesses.empty()) {
      const Matrix& w = a.witnesses.front().input;
      out << "    witness: " << matrix_rows_json(w).dump() << "  (" << a.witnesses.front().note << ")\n";
    }
  }

  const Matrix center = wilkinson_flip_center();
  const auto probe = continuity_probe(f, center, 1e-6, 200, opt.seed);
  const auto baseline = continuity_probe(StepMap::qr(), center, 1e-6, 200, opt.seed);
  out << "continuity probe at " << matrix_rows_json(center).dump() << ", radius 1e-6:\n";
  out << "  " << f.name() << " max amplification " << fmt_g(probe.max_amplification) << '\n';
  out << "  qr baseline max amplification " << fmt_g(baseline.max_amplification) << '\n';
  out << "  witness pair: " << matrix_rows_json(probe.witness_x).dump() << " vs "
      << matrix_rows_json(probe.witness_y).dump() << '\n';
  if (baseline.max_amplification > 0.0 && probe.max_amplification >= 100.0 * baseline.max_amplification) {
    out << "  discontinuity detected (>= 100x the naive QR amplification)\n";
  }

  if (!opt.out_path.empty()) {
    write_file(opt.out_path, Json{{"audit", axiom_audit_json(audit)},
                                  {"continuity", continuity_probe_json(probe)},
                                  {"baseline", continuity_probe_json(baseline)}}
                                     .dump(2) +
                                 "\n");
  }
  return kExitOk;
}

inline std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.svg", k);
  return buf;
}

inline int cmd_render(const RenderOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<TraceRecord> trace;
  std::vector<std::string> overlays;
  try {
    overlays = detail::parse_overlays(opt.overlay);
    trace = trace_from_jsonl(read_file(opt.trace_path));
    for (const auto& r : trace) {
      if (r.matrix.size() != 2 && r.matrix.size() != 3) {
        throw DimensionMismatch("unrenderable dimension n = " + std::to_string(r.matrix.size()));
      }
    }
    std::filesystem::create_directories(opt.out_dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  for (const auto& r : trace) {
    std::vector<Overlay> frame;
    const auto m = SymPsdMatrix::unchecked(r.matrix);
    for (const auto& o : overlays) {
      if (o == "input") {
        frame.push_back({"Input PSD matrix", std::string(kInputColor), r.matrix});
      } else if (o == "qr") {
        frame.push_back({"1 iteration QR", std::string(kQrColor), qr_step(m)});
      } else {
        try {
          frame.push_back({"1 iteration LR", std::string(kLrColor), lr_step(m)});
        } catch (const SingularMatrix&) {
          // no LR image of a singular matrix
        }
      }
    }
    const auto path = std::filesystem::path(opt.out_dir) / frame_name(r.k);
    try {
      write_file(path.string(), render_svg_frame(frame, "k = " + std::to_string(r.k)));
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitInputError;
    }
  }
  out << "wrote " << trace.size() << " frame(s) to " << opt.out_dir << '\n';
  return kExitOk;
}

}  // namespace eigenlab::cli
