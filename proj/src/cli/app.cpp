#include "wkcal/cli/app.hpp"

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "wkcal/cli/commands.hpp"
#include "wkcal/errors.hpp"
#include "wkcal/numerics/parallel.hpp"

namespace wkcal::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Windkessel simulation, least-squares fitting and Bayesian calibration", "wkcal"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", sets, "Override one setting, e.g. --set calibrate.iterations=5000")->take_all();
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--threads", threads, "Worker threads (0 = all cores, 1 = serial)");
  app.add_option("--out-dir", out_dir, "Output directory");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic field CSV and its noiseless reference");
  std::optional<int> setup;
  simulate->add_option("--setup", setup, "Standard setup 1..4, or 0 for setup.* values");

  auto* fit = app.add_subcommand("fit", "Least-squares WK2/WK3 fits");
  std::optional<std::string> input;
  std::vector<std::string> models;
  bool per_cycle = false;
  fit->add_option("--input", input, "Field CSV (default: simulate from the setup)");
  fit->add_option("--model", models, "wk2 and/or wk3");
  fit->add_flag("--per-cycle", per_cycle, "Also fit each cycle separately");

  auto* replicate = app.add_subcommand("replicate-study", "Fits over noise replicates of the standard setups");
  std::optional<std::size_t> n_replicates;
  std::vector<int> setups;
  replicate->add_option("--n", n_replicates, "Replicates per setup");
  replicate->add_option("--setups", setups, "Setups to run");
  replicate->add_option("--model", models, "wk2 and/or wk3");

  auto* calibrate = app.add_subcommand("calibrate", "Two-stage Bayesian calibration of WK2 with discrepancy");
  bool prior_only = false, mean_only = false;
  std::optional<std::string> guess;
  calibrate->add_option("--input", input, "Field CSV (default: simulate from the setup)");
  calibrate->add_flag("--prior-only", prior_only, "Replace the likelihood by a constant");
  calibrate->add_flag("--mean-only", mean_only, "Ignore emulator predictive covariance");
  calibrate->add_option("--initial-guess", guess, "wk2_fit, box_center or fixed");

  auto* report = app.add_subcommand("report", "Collect reports into summary tables");
  ReportOptions report_opts;
  report->add_option("reports", report_opts.inputs, "JSON reports (default: those in the output directory)");
  report->add_flag("--strict", report_opts.strict, "Fail when a report came from a different configuration");

  std::vector<std::string> argv_reversed(args.rbegin(), args.rend());
  try {
    app.parse(argv_reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed) sets.push_back("seed=" + std::to_string(*seed));
    if (threads) sets.push_back("threads=" + std::to_string(*threads));
    if (out_dir) sets.push_back("out_dir=" + nlohmann::json(*out_dir).dump());
    if (setup) sets.push_back("setup.preset=" + std::to_string(*setup));
    if (input) sets.push_back("input=" + nlohmann::json(*input).dump());
    if (per_cycle) sets.push_back("fit.per_cycle=true");
    if (n_replicates) sets.push_back("replicate.n=" + std::to_string(*n_replicates));
    if (!setups.empty()) sets.push_back("replicate.setups=" + nlohmann::json(setups).dump());
    if (!models.empty()) {
      sets.push_back((replicate->parsed() ? "replicate.models=" : "fit.models=") + nlohmann::json(models).dump());
    }
    if (prior_only) sets.push_back("calibrate.prior_only=true");
    if (mean_only) sets.push_back("calibrate.mean_only=true");
    if (guess) sets.push_back("calibrate.initial_guess=" + nlohmann::json(*guess).dump());
    const RunConfig config = load_config(config_path, sets);
    numerics::set_thread_count(config.threads);

    nlohmann::json result;
    if (simulate->parsed()) result = cmd_simulate(config, err);
    if (fit->parsed()) result = cmd_fit(config, err);
    if (replicate->parsed()) result = cmd_replicate_study(config, err);
    if (calibrate->parsed()) result = cmd_calibrate(config, err);
    if (report->parsed()) result = cmd_report(config, report_opts, err);
    out << "wrote " << result["command"].get<std::string>() << " outputs to " << config.out_dir << " (config "
        << result["config_hash"].get<std::string>() << ")\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    err << "error in stage " << e.stage() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace wkcal::cli
