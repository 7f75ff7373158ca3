#include "wkcal/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/rng.hpp"

namespace wkcal::cli {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SetupConfig, preset, model, R, R1, R2, C, noise_sd, resolution, n_cycles)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InflowConfig, profile, period, systole, mean_flow)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BoundsConfig, lower, upper)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FitConfig, models, per_cycle, n_starts, wk2_bounds, wk3_bounds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReplicateConfig, setups, n, models)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CalibrateConfig, design_size, n_influential, initial_guess, R0, C0,
                                                chains, iterations, burn_in_fraction, thin, target_draws,
                                                prior_multiple, grid_step, prior_only, mean_only)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, seed, threads, out_dir, input, setup, inflow, fit,
                                                replicate, calibrate)

namespace {

RunConfig defaults() {
  RunConfig c;
  const auto b2 = default_bounds(ModelKind::wk2), b3 = default_bounds(ModelKind::wk3);
  c.fit.wk2_bounds = {b2.lower, b2.upper};
  c.fit.wk3_bounds = {b3.lower, b3.upper};
  return c;
}

std::string kind_name(const nlohmann::json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

bool same_kind(const nlohmann::json& want, const nlohmann::json& got) {
  if (want.is_number_integer()) {
    if (!got.is_number_integer()) return false;
    return !want.is_number_unsigned() || got.is_number_unsigned() || got.get<long long>() >= 0;
  }
  if (want.is_number_float()) return got.is_number();
  return kind_name(want) == kind_name(got);
}

// Recursively overlays `src` on `dst`, which holds the defaults.
void overlay(nlohmann::json& dst, const nlohmann::json& src, const std::string& path) {
  if (!src.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : src.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw ConfigError(where + ": unknown key");
    auto& slot = dst[key];
    if (slot.is_object()) {
      overlay(slot, value, where);
    } else if (!same_kind(slot, value)) {
      throw ConfigError(where + ": expected " + kind_name(slot) + ", got " + kind_name(value));
    } else {
      slot = value;
    }
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = config;
  return j;
}

RunConfig parse_config(const nlohmann::json& overrides) {
  nlohmann::json merged = to_json(defaults());
  overlay(merged, overrides, "");
  RunConfig c;
  try {
    c = merged.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

void apply_set(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& assignments) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + *path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(*path + ": " + e.what());
    }
  }
  for (const auto& a : assignments) apply_set(doc, a);
  return parse_config(doc);
}

void validate(const RunConfig& c) {
  const auto& s = c.setup;
  require(s.preset >= 0 && s.preset <= 4, "setup.preset", "must be 0 (custom) or 1..4");
  require(s.model == "wk2" || s.model == "wk3", "setup.model", "must be wk2 or wk3");
  require(s.R > 0.0 && s.R1 >= 0.0 && s.R2 > 0.0 && s.C > 0.0, "setup", "resistances and compliance must be positive");
  require(s.noise_sd >= 0.0, "setup.noise_sd", "must be >= 0");
  require(s.resolution > 0.0, "setup.resolution", "must be positive");
  require(s.n_cycles >= 1, "setup.n_cycles", "must be >= 1");

  const auto& in = c.inflow;
  require(in.profile == "half_sine" || in.profile == "constant", "inflow.profile", "must be half_sine or constant");
  require(in.period > 0.0, "inflow.period", "must be positive");
  require(in.systole > 0.0 && in.systole < in.period, "inflow.systole", "must lie in (0, period)");
  require(in.mean_flow >= 0.0, "inflow.mean_flow", "must be >= 0");

  require(!c.fit.models.empty(), "fit.models", "must not be empty");
  try {
    parse_models(c.fit.models);
    parse_models(c.replicate.models);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("models: ") + e.what());
  }
  require(c.fit.n_starts >= 1, "fit.n_starts", "must be >= 1");
  for (const auto& [name, b, n] : {std::tuple{"fit.wk2_bounds", c.fit.wk2_bounds, 2}, std::tuple{"fit.wk3_bounds", c.fit.wk3_bounds, 3}}) {
    require(b.lower.size() == static_cast<std::size_t>(n) && b.upper.size() == static_cast<std::size_t>(n), name,
            "needs " + std::to_string(n) + " lower and upper values");
    for (int i = 0; i < n; ++i) require(b.lower[i] >= 0.0 && b.lower[i] < b.upper[i], name, "needs 0 <= lower < upper");
  }

  require(!c.replicate.setups.empty(), "replicate.setups", "must not be empty");
  for (int s : c.replicate.setups) require(s >= 1 && s <= 4, "replicate.setups", "entries must be 1..4");
  require(c.replicate.n >= 1, "replicate.n", "must be >= 1");

  const auto& k = c.calibrate;
  require(k.design_size >= 4, "calibrate.design_size", "must be >= 4");
  require(k.n_influential >= 5, "calibrate.n_influential", "must be >= 5");
  try {
    koh::parse_initial_guess(k.initial_guess);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("calibrate.initial_guess: ") + e.what());
  }
  require(k.chains >= 1, "calibrate.chains", "must be >= 1");
  require(k.iterations >= 10, "calibrate.iterations", "must be >= 10");
  require(k.burn_in_fraction >= 0.0 && k.burn_in_fraction < 1.0, "calibrate.burn_in_fraction", "must lie in [0, 1)");
  require(k.target_draws >= 1, "calibrate.target_draws", "must be >= 1");
  require(k.prior_multiple > 0.0, "calibrate.prior_multiple", "must be positive");
  require(k.grid_step >= 0.0, "calibrate.grid_step", "must be >= 0");
}

std::string config_hash(const RunConfig& config) {
  nlohmann::json j = to_json(config);
  j.erase("out_dir");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InflowWaveform make_inflow(const InflowConfig& inflow) {
  if (inflow.profile == "constant") return InflowWaveform::constant(inflow.mean_flow, inflow.period);
  return InflowWaveform::half_sine(inflow.period, inflow.systole, inflow.mean_flow);
}

SetupSpec make_setup(const RunConfig& config) { return make_setup(config, config.setup.preset); }

SetupSpec make_setup(const RunConfig& config, int preset) {
  const auto& s = config.setup;
  SetupSpec spec;
  if (preset != 0) {
    spec = standard_setup(preset, config.seed);
  } else {
    spec.name = "custom";
    spec.truth = s.model == "wk2" ? WkParams{Wk2Params{s.R, s.C}} : WkParams{Wk3Params{s.R1, s.R2, s.C}};
    spec.seed = config.seed;
  }
  spec.noise_sd = s.noise_sd;
  spec.resolution = s.resolution;
  spec.n_cycles = s.n_cycles;
  spec.inflow = make_inflow(config.inflow);
  wkcal::validate(spec);
  return spec;
}

FitOptions make_fit_options(const RunConfig& config, ModelKind model) {
  FitOptions o;
  o.n_starts = config.fit.n_starts;
  o.seed = numerics::derive_key(config.seed, 0xf17);
  const auto& b = model == ModelKind::wk2 ? config.fit.wk2_bounds : config.fit.wk3_bounds;
  o.bounds = numerics::BoxBounds{b.lower, b.upper};
  return o;
}

koh::CalibrationConfig make_calibration_config(const RunConfig& config) {
  const auto& k = config.calibrate;
  koh::CalibrationConfig c;
  c.emulator.design_size = k.design_size;
  c.emulator.n_influential = k.n_influential;
  c.emulator.seed = numerics::derive_key(config.seed, 0xe3);
  c.emulator.mle.seed = numerics::derive_key(config.seed, 0x51);
  c.initial_guess = koh::parse_initial_guess(k.initial_guess);
  c.R0 = k.R0;
  c.C0 = k.C0;
  c.bias_mle.seed = numerics::derive_key(config.seed, 0xb1a5);
  c.mcmc.chains = k.chains;
  c.mcmc.iterations = k.iterations;
  c.mcmc.burn_in_fraction = k.burn_in_fraction;
  c.mcmc.thin = k.thin;
  c.mcmc.target_draws = k.target_draws;
  c.mcmc.seed = numerics::derive_key(config.seed, 0x4d43);
  c.mcmc.prior_only = k.prior_only;
  c.mcmc.mean_only = k.mean_only;
  c.prior_multiple = k.prior_multiple;
  c.grid_step = k.grid_step;
  c.products.seed = numerics::derive_key(config.seed, 0x9d);
  c.products.mean_only = k.mean_only;
  return c;
}

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> out;
  for (const auto& n : names) out.push_back(parse_model_kind(n));
  return out;
}

}  // namespace wkcal::cli
