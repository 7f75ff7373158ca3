#include "wkcal/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "wkcal/cli/csv_io.hpp"
#include "wkcal/errors.hpp"

namespace wkcal::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

class Timer {
 public:
  Timer(std::ostream& log, std::string label) : log_(log), label_(std::move(label)) {}
  ~Timer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_ << "[wkcal] " << label_ << " took " << s << " s\n";
  }

 private:
  std::ostream& log_;
  std::string label_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path out_path(const RunConfig& config, const std::string& file) {
  fs::create_directories(config.out_dir);
  return fs::path(config.out_dir) / file;
}

nlohmann::json header(const RunConfig& config, const std::string& command) {
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"wkcal_version", kVersion},
          {"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"config", to_json(config)}};
}

void write_json(const fs::path& path, const nlohmann::json& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << report.dump(2) << '\n';
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

nlohmann::json params_json(const WkParams& p) {
  nlohmann::json j;
  if (const auto* w2 = std::get_if<Wk2Params>(&p)) {
    j["R"] = w2->R;
    j["C"] = w2->C;
  } else {
    const auto& w3 = std::get<Wk3Params>(p);
    j["R1"] = w3.R1;
    j["R2"] = w3.R2;
    j["R"] = w3.R1 + w3.R2;
    j["C"] = w3.C;
  }
  return j;
}

struct Dataset {
  FieldData data;
  InflowWaveform inflow;
  nlohmann::json source;
};

Dataset load_dataset(const RunConfig& config) {
  if (!config.input.empty()) {
    auto data = read_field_csv(config.input);
    auto inflow = inflow_from_data(data);
    return {std::move(data), std::move(inflow), {{"kind", "recorded"}, {"path", config.input}}};
  }
  const auto spec = make_setup(config);
  return {generate_dataset(spec), spec.inflow,
          {{"kind", "synthetic"}, {"setup", spec.name}, {"truth", params_json(spec.truth)}}};
}

std::string cell(double v) { return format_number(v); }

}  // namespace

nlohmann::json cmd_simulate(const RunConfig& config, std::ostream& log) {
  Timer timer(log, "simulate");
  const auto spec = make_setup(config);
  const auto noisy = generate_dataset(spec);
  const auto reference = noiseless_dataset(spec);
  write_field_csv(out_path(config, "field.csv").string(), noisy);
  write_field_csv(out_path(config, "reference.csv").string(), reference);
  auto report = header(config, "simulate");
  report["setup"] = spec.name;
  report["truth"] = params_json(spec.truth);
  report["rows"] = noisy.size();
  report["files"] = {"field.csv", "reference.csv"};
  write_json(out_path(config, "simulate.json"), report);
  return report;
}

nlohmann::json cmd_fit(const RunConfig& config, std::ostream& log) {
  Timer timer(log, "fit");
  const auto ds = load_dataset(config);
  auto report = header(config, "fit");
  report["data"] = ds.source;
  report["per_cycle"] = config.fit.per_cycle;
  std::vector<std::vector<std::string>> rows;
  auto add_row = [&](ModelKind kind, const std::string& label, const WkParams& p, double rss) {
    const bool wk3 = kind == ModelKind::wk3;
    rows.push_back({std::string(to_string(kind)), label, cell(total_resistance(p)), cell(compliance(p)),
                    wk3 ? cell(std::get<Wk3Params>(p).R1) : "", wk3 ? cell(std::get<Wk3Params>(p).R2) : "",
                    std::isnan(rss) ? "" : cell(rss), config_hash(config)});
  };

  for (const auto kind : parse_models(config.fit.models)) {
    const auto opts = make_fit_options(config, kind);
    nlohmann::json m;
    m["model"] = to_string(kind);
    const auto pooled = fit(kind, ds.data, ds.inflow, opts);
    nlohmann::json starts = nlohmann::json::array();
    for (const auto& s : pooled.starts) {
      starts.push_back({{"start", s.start},
                        {"terminal", s.terminal},
                        {"start_rss", s.start_rss},
                        {"rss", s.rss},
                        {"converged", s.converged},
                        {"error", s.error}});
    }
    m["pooled"] = {{"params", params_json(pooled.params)},
                   {"rss", pooled.rss},
                   {"converged", pooled.converged},
                   {"best_start", pooled.best_start_index},
                   {"starts", starts}};
    add_row(kind, "pooled", pooled.params, pooled.rss);

    if (config.fit.per_cycle) {
      const auto per = fit_per_cycle(kind, ds.data, ds.inflow, opts);
      const auto ids = ds.data.cycle_ids();
      nlohmann::json cycles = nlohmann::json::array();
      std::vector<double> sum(to_vector(per.front().params).size(), 0.0);
      for (std::size_t i = 0; i < per.size(); ++i) {
        cycles.push_back({{"cycle_id", ids[i]}, {"params", params_json(per[i].params)}, {"rss", per[i].rss}});
        add_row(kind, "cycle_" + std::to_string(ids[i]), per[i].params, per[i].rss);
        const auto v = to_vector(per[i].params);
        for (std::size_t j = 0; j < v.size(); ++j) sum[j] += v[j];
      }
      for (double& s : sum) s /= static_cast<double>(per.size());
      const auto mean = from_vector(kind, sum);
      m["per_cycle"] = cycles;
      m["mean"] = params_json(mean);
      add_row(kind, "mean", mean, std::nan(""));
    }
    report["models"].push_back(m);
    log << "[wkcal] " << to_string(kind) << " pooled fit rss " << pooled.rss << '\n';
  }
  write_table_csv(out_path(config, "fit_table.csv").string(), {"model", "row", "R", "C", "R1", "R2", "rss", "config_hash"},
                  rows);
  write_json(out_path(config, "fit.json"), report);
  return report;
}

nlohmann::json cmd_replicate_study(const RunConfig& config, std::ostream& log) {
  Timer timer(log, "replicate-study");
  auto report = header(config, "replicate-study");
  std::vector<std::vector<std::string>> rows;
  for (int setup : config.replicate.setups) {
    const auto spec = make_setup(config, setup);
    for (const auto kind : parse_models(config.replicate.models)) {
      Timer t(log, spec.name + " " + std::string(to_string(kind)));
      const auto summary = replicate_study(spec, kind, config.replicate.n, make_fit_options(config, kind));
      nlohmann::json params = nlohmann::json::array();
      for (const auto& p : summary.parameters) {
        params.push_back({{"name", p.name}, {"mean", p.mean}, {"lo90", p.lower}, {"hi90", p.upper}});
        rows.push_back({spec.name, std::string(to_string(kind)), p.name, cell(p.mean), cell(p.lower), cell(p.upper),
                        std::to_string(summary.n_replicates), std::to_string(summary.n_failed), config_hash(config)});
      }
      report["studies"].push_back({{"setup", spec.name},
                                   {"truth", params_json(spec.truth)},
                                   {"model", to_string(kind)},
                                   {"n_replicates", summary.n_replicates},
                                   {"n_failed", summary.n_failed},
                                   {"parameters", params}});
    }
  }
  write_table_csv(out_path(config, "replicate_study.csv").string(),
                  {"setup", "model", "parameter", "mean", "lo90", "hi90", "n_replicates", "n_failed", "config_hash"}, rows);
  write_json(out_path(config, "replicate_study.json"), report);
  return report;
}

nlohmann::json cmd_calibrate(const RunConfig& config, std::ostream& log) {
  Timer timer(log, "calibrate");
  const auto ds = load_dataset(config);
  const auto result = koh::calibrate(ds.data, ds.inflow, make_calibration_config(config));

  write_samples_csv(out_path(config, "posterior_samples.csv").string(), result.samples);
  for (const auto* band : {&result.products.bias_corrected, &result.products.pure_model, &result.products.bias}) {
    write_band_csv(out_path(config, "band_" + std::string(koh::to_string(band->kind)) + ".csv").string(), *band);
  }

  auto report = header(config, "calibrate");
  report["data"] = ds.source;
  nlohmann::json summary;
  for (const auto& p : result.summary.parameters) {
    summary[p.name] = {{"mean", p.mean},     {"map", p.map},         {"modes", p.modes},
                       {"lo90", p.lower},    {"hi90", p.upper},      {"bimodal", p.bimodal}};
  }
  report["summary"] = summary;
  const auto& s = result.samples;
  report["mcmc"] = {{"chains", s.chains},
                    {"iterations", s.iterations},
                    {"burn_in", s.burn_in},
                    {"thin", s.thin},
                    {"n_draws", s.draws.size()},
                    {"acceptance", s.acceptance},
                    {"conditioning_rejections", s.conditioning_rejections},
                    {"rhat", {{"R", s.rhat_R}, {"C", s.rhat_C}}},
                    {"prior_only", config.calibrate.prior_only},
                    {"mean_only", config.calibrate.mean_only}};
  const auto& k = result.emulator.gp.kernel();
  report["emulator"] = {{"inputs", {"I", "t", "R", "C"}},
                        {"variance", k.variance},
                        {"lengthscales", std::vector<double>(k.lengthscales.begin(), k.lengthscales.end())},
                        {"exponents", std::vector<double>(k.exponents.begin(), k.exponents.end())},
                        {"noise_precision", result.emulator.gp.noise_precision()},
                        {"design_size", result.emulator.design.calibration.rows()},
                        {"influential_times", result.emulator.design.points.times}};
  const auto& b = result.bias;
  report["bias"] = {{"R0", b.R0},
                    {"C0", b.C0},
                    {"initial_guess", config.calibrate.initial_guess},
                    {"lengthscales", std::vector<double>(b.kernel.lengthscales.begin(), b.kernel.lengthscales.end())},
                    {"lambda_b_hat", b.lambda_b_hat},
                    {"lambda_f_hat", b.lambda_f_hat}};
  report["priors"] = {{"R", {result.priors.box.lo, result.priors.box.hi}},
                      {"C", {result.priors.box.lo, result.priors.box.hi}},
                      {"lambda_b_mean", result.priors.lambda_b_mean},
                      {"lambda_f_mean", result.priors.lambda_f_mean}};
  report["products"] = {{"skipped_draws", result.products.skipped},
                        {"average_width",
                         {{"bias_corrected", result.products.bias_corrected.average_width()},
                          {"pure_model", result.products.pure_model.average_width()},
                          {"bias", result.products.bias.average_width()}}}};
  report["files"] = {"posterior_samples.csv", "band_bias_corrected.csv", "band_pure_model.csv", "band_bias.csv"};
  write_json(out_path(config, "calibration.json"), report);
  log << "[wkcal] R " << result.summary.at("R").mean << " C " << result.summary.at("C").mean << " split-R-hat "
      << s.rhat_R << ", " << s.rhat_C << '\n';
  return report;
}

nlohmann::json cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& log) {
  std::vector<fs::path> inputs;
  if (options.inputs.empty()) {
    for (const char* f : {"simulate.json", "fit.json", "replicate_study.json", "calibration.json"}) {
      const auto p = fs::path(config.out_dir) / f;
      if (fs::exists(p)) inputs.push_back(p);
    }
    if (inputs.empty()) throw Error("no reports found in " + config.out_dir);
  } else {
    for (const auto& i : options.inputs) inputs.emplace_back(i);
  }

  const std::string expected = config_hash(config);
  std::vector<std::vector<std::string>> rows;
  nlohmann::json sources = nlohmann::json::array();
  std::string md = "# wkcal report\n\n| source | method | parameter | estimate | lower | upper | config |\n|---|---|---|---|---|---|---|\n";
  auto add = [&](const std::string& src, const std::string& method, const std::string& param, double est,
                 std::optional<double> lo, std::optional<double> hi, const std::string& hash) {
    const std::string l = lo ? cell(*lo) : "", h = hi ? cell(*hi) : "";
    rows.push_back({src, method, param, cell(est), l, h, hash});
    md += "| " + src + " | " + method + " | " + param + " | " + cell(est) + " | " + l + " | " + h + " | " + hash + " |\n";
  };

  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open report " + path.string());
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    if (!r.contains("schema_version") || r["schema_version"] != kSchemaVersion) {
      throw DataError(path.string() + ": unsupported or missing schema_version");
    }
    const std::string hash = r.value("config_hash", "");
    const bool matches = hash == expected;
    if (!matches) {
      if (options.strict) throw ConfigError(path.string() + ": config hash " + hash + " does not match " + expected);
      log << "[wkcal] warning: " << path.string() << " was produced by config " << hash << ", current is " << expected
          << '\n';
    }
    sources.push_back({{"path", path.filename().string()}, {"command", r["command"]}, {"config_hash", hash},
                       {"matches_config", matches}});
    const std::string src = path.filename().string();
    const std::string command = r["command"];
    if (command == "simulate") {
      for (const auto& [name, v] : r["truth"].items()) add(src, "truth", name, v.get<double>(), {}, {}, hash);
    } else if (command == "fit") {
      for (const auto& m : r["models"]) {
        const std::string method = "nls_" + m["model"].get<std::string>();
        for (const auto& [name, v] : m["pooled"]["params"].items()) add(src, method, name, v.get<double>(), {}, {}, hash);
        if (m.contains("mean")) {
          for (const auto& [name, v] : m["mean"].items()) add(src, method + "_cycle_mean", name, v.get<double>(), {}, {}, hash);
        }
      }
    } else if (command == "replicate-study") {
      for (const auto& s : r["studies"]) {
        const std::string method = "replicate_" + s["model"].get<std::string>() + "_" + s["setup"].get<std::string>();
        for (const auto& p : s["parameters"]) {
          add(src, method, p["name"], p["mean"].get<double>(), p["lo90"].get<double>(), p["hi90"].get<double>(), hash);
        }
      }
    } else if (command == "calibrate") {
      for (const auto& [name, p] : r["summary"].items()) {
        add(src, "koh_wk2", name, p["mean"].get<double>(), p["lo90"].get<double>(), p["hi90"].get<double>(), hash);
      }
    } else {
      throw DataError(path.string() + ": unknown command '" + command + "'");
    }
  }

  write_table_csv(out_path(config, "summary_table.csv").string(),
                  {"source", "method", "parameter", "estimate", "lower", "upper", "config_hash"}, rows);
  {
    std::ofstream out(out_path(config, "report.md"), std::ios::binary | std::ios::trunc);
    out << md;
    if (!out) throw Error("cannot write report.md");
  }
  auto report = header(config, "report");
  report["sources"] = sources;
  report["rows"] = rows.size();
  write_json(out_path(config, "report.json"), report);
  return report;
}

}  // namespace wkcal::cli
