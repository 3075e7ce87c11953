#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ndepr/ndepr.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  bool plot = false;
  std::optional<std::string> data;
};

void add_common(CLI::App* sub, Options& o, bool config_required) {
  auto* c = sub->add_option("--config", o.config, "config file path or bundled recipe name");
  if (config_required) c->required();
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--seed", o.seed, "override every seed in the config");
  sub->add_option("--threads", o.threads, "worker threads, 0 = all cores")->capture_default_str();
  sub->add_flag("--plot", o.plot, "also write an SVG plot");
}

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ndepr;
  CLI::App app{"Zero-field EPR with NV nanodiamond sensors: simulation, fitting and checks"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  Options o;
  auto* simulate = app.add_subcommand("simulate", "write simulated spectra");
  add_common(simulate, o, true);
  auto* fit = app.add_subcommand("fit", "fit a spectrum CSV (or the config's synthetic data)");
  add_common(fit, o, true);
  fit->add_option("--data", o.data, "spectrum CSV with columns sweep_value,contrast,stderr")->check(CLI::ExistingFile);
  auto* budget = app.add_subcommand("budget", "linewidth budget report");
  add_common(budget, o, true);
  auto* oracle = app.add_subcommand("oracle", "cross-relaxation rate vs Lindblad integration");
  add_common(oracle, o, true);
  auto* transitions = app.add_subcommand("transitions", "print the vanadyl transition table");
  add_common(transitions, o, false);
  auto* list = app.add_subcommand("configs", "list bundled recipes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfigError);
  }

  if (list->parsed()) {
    for (const auto& n : bundled_config_names()) std::cout << n << "\n";
    return 0;
  }

  RunContext ctx;
  ctx.out_dir = o.out;
  ctx.seed = o.seed;
  ctx.threads = o.threads;
  ctx.plot = o.plot;
  ctx.command_line = joined_args(argc, argv);

  try {
    RunResult res;
    if (transitions->parsed()) {
      ctx.write_files = transitions->count("--out") > 0;
      ExperimentConfig cfg;
      cfg.source = "defaults";
      if (!o.config.empty()) cfg = load_config(o.config);
      res = run_transitions(cfg, ctx);
    } else {
      const ExperimentConfig cfg = load_config(o.config);
      if (simulate->parsed()) res = run_simulate(cfg, ctx);
      else if (fit->parsed()) res = run_fit(cfg, o.data ? std::optional<std::filesystem::path>(*o.data) : std::nullopt, ctx);
      else if (budget->parsed()) res = run_budget(cfg, ctx);
      else res = run_oracle(cfg, ctx);
    }
    std::cout << res.summary;
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
    std::cout.flush();
    return static_cast<int>(res.code);
  } catch (const std::exception& e) {
    std::cerr << "ndepr: error: " << e.what() << "\n";
    return static_cast<int>(exit_code_for(e));
  }
}
