// SPDX-License-Identifier: Apache-2.0
//
// eigenlab: run, verify, audit, render and serve.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "eigenlab/cli.hpp"
#include "eigenlab/server.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("eigenlab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%l] %v");
  const char* env = std::getenv("EIGENLAB_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

int serve(int port) {
  // Block SIGINT/SIGTERM in every thread; a dedicated waiter stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  eigenlab::SessionStore store;
  eigenlab::SessionServer server(store, [](const std::string& line) { spdlog::info("{}", line); });
  if (!server.bind("0.0.0.0", port)) {
    spdlog::error("cannot bind port {} (in use?)", port);
    return 1;
  }
  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server.stop();
  });
  spdlog::info("serving session protocol on port {}", port);
  server.listen();
  // Wake the waiter if the server stopped for any other reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  namespace cli = eigenlab::cli;

  CLI::App app{"eigenlab: QR / LR eigenvalue iteration laboratory for PSD matrices"};
  app.require_subcommand(1);

  cli::RunOptions run_opt;
  auto* run = app.add_subcommand("run", "iterate a matrix to convergence");
  run->add_option("--matrix", run_opt.matrix_path, "matrix JSON file")->required();
  run->add_option("--algo", run_opt.algo, "qr | lr")->check(CLI::IsMember({"qr", "lr"}));
  run->add_option("--shift", run_opt.shift, "none | constant:<float> | gershgorin | wilkinson");
  run->add_option("--tol", run_opt.tol, "per-row off-diagonal tolerance, relative to scale");
  run->add_option("--max-iters", run_opt.max_iters, "iteration budget");
  run->add_option("--trace", run_opt.trace_path, "write a JSON Lines trace here");
  run->add_option("--trace-every", run_opt.trace_every, "record every k-th step");
  run->add_flag("--make-psd", run_opt.make_psd, "shift a symmetric input into the PSD cone first");

  cli::VerifyOptions verify_opt;
  auto* verify = app.add_subcommand("verify", "check the dynamical observations on seeded samples");
  verify->add_option("--observations", verify_opt.observations, "all | comma separated ids in 1..10");
  verify->add_option("--samples", verify_opt.samples, "samples per observation");
  verify->add_option("--seed", verify_opt.seed, "random seed")->required();
  verify->add_option("--algo", verify_opt.algo, "qr | lr")->check(CLI::IsMember({"qr", "lr"}));
  verify->add_option("--out", verify_opt.out_path, "write the JSON report here");

  cli::AuditOptions audit_opt;
  auto* audit = app.add_subcommand("audit", "audit the fixed-point axioms and probe continuity");
  audit->add_option("--algo", audit_opt.algo, "qr | lr")->check(CLI::IsMember({"qr", "lr"}));
  audit->add_option("--shift", audit_opt.shift, "none | constant:<float> | gershgorin | wilkinson");
  audit->add_option("--samples", audit_opt.samples, "number of samples");
  audit->add_option("--seed", audit_opt.seed, "random seed")->required();
  audit->add_option("--out", audit_opt.out_path, "write the JSON report here");

  cli::RenderOptions render_opt;
  auto* render = app.add_subcommand("render", "render a trace as SVG frames");
  render->add_option("--trace", render_opt.trace_path, "JSON Lines trace")->required();
  render->add_option("--out", render_opt.out_dir, "output directory")->required();
  render->add_option("--overlay", render_opt.overlay, "comma separated: input,qr,lr");

  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "serve the interactive session protocol over HTTP");
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*run) return cli::cmd_run(run_opt, std::cout, std::cerr);
  if (*verify) return cli::cmd_verify(verify_opt, std::cout, std::cerr);
  if (*audit) return cli::cmd_audit(audit_opt, std::cout, std::cerr);
  if (*render) return cli::cmd_render(render_opt, std::cout, std::cerr);
  return serve(port);
}
