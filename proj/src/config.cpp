#include "budgetlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "budgetlab/error.hpp"

namespace budgetlab {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering its dotted path for diagnostics and
// rejecting keys it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key), "required field is missing");
    return j_.at(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

RegimeKind parse_regime_kind(const std::string& s, const std::string& field) {
  if (s == "static") return RegimeKind::kStatic;
  if (s == "random_walk") return RegimeKind::kRandomWalk;
  if (s == "seasonal") return RegimeKind::kSeasonal;
  throw ConfigError(field, "unknown regime '" + s + "' (static, random_walk, seasonal)");
}

const char* decline_name(DeclineForm f) {
  return f == DeclineForm::kExponential ? "exponential" : "geometric";
}

}  // namespace

std::string to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::kStatic:
      return "static";
    case RegimeKind::kRandomWalk:
      return "random_walk";
    case RegimeKind::kSeasonal:
      return "seasonal";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  check(!controllers.empty(), "controllers", "at least one controller is required");
  check(env.weeks_per_quarter >= 1, "environment.weeks_per_quarter", "must be >= 1");
  check(n_trials >= 1, "trials", "must be >= 1");
  check(bootstrap_reps >= 100, "bootstrap_reps", "must be >= 100");
  check(regime.rw_sigma >= 0.0, "regime.rw_sigma", "must be >= 0");
  check(regime.decline_rate >= 0.0 && regime.decline_rate < 1.0, "regime.decline_rate", "must lie in [0, 1)");
  check(regime.smooth_lower >= 0.0 && regime.smooth_lower < 1.0, "regime.smooth_lower", "must lie in [0, 1)");
  check(regime.smooth_upper >= 0.0, "regime.smooth_upper", "must be >= 0");
  check(env.theta.amplitude > 0.0, "environment.amplitude", "must be positive");
  check(env.theta.rate > 0.0, "environment.rate", "must be positive");
  check(env.theta.shape > 0.0, "environment.shape", "must be positive");
  check(env.exec.tracking_rate > 0.0 && env.exec.tracking_rate <= 1.0, "environment.tracking_rate",
        "must lie in (0, 1]");
  check(env.exec.exec_noise_coeff >= 0.0, "environment.exec_noise_coeff", "must be >= 0");
  check(env.exec.obs_noise_sd >= 0.0, "environment.obs_noise_sd", "must be >= 0");
  check(env.history.years >= 1, "history.years", "must be >= 1");
  check(env.history.annual_budget > 0.0, "history.annual_budget", "must be positive");
  check(env.history.annual_amplitude >= 0.0 && env.history.annual_amplitude < 1.0,
        "history.annual_amplitude", "must lie in [0, 1)");
  check(env.history.weekday_amplitude >= 0.0 && env.history.weekday_amplitude < 1.0,
        "history.weekday_amplitude", "must lie in [0, 1)");
  check(env.budget.lambda_lo > 0.0 && env.budget.lambda_hi >= env.budget.lambda_lo, "budget.lambda_hi",
        "need 0 < lambda_lo <= lambda_hi");
  check(env.budget.quarter >= 1 && env.budget.quarter <= 4, "budget.quarter", "must lie in 1..4");
  check(settings.anchor_scale > 0.0, "controller_settings.anchor_scale", "must be positive");
  check(settings.pf_particles >= 2, "controller_settings.pf_particles", "must be >= 2");
  check(settings.pf_spread >= 0.0, "controller_settings.pf_spread", "must be >= 0");
  check(settings.pf_prior_weeks >= 3, "controller_settings.pf_prior_weeks", "must be >= 3");
  check(settings.rolling.window_weeks >= 3, "controller_settings.rolling_window_weeks", "must be >= 3");
  check(settings.rolling.segment_weeks >= 0, "controller_settings.rolling_segment_weeks", "must be >= 0");
  check(settings.solver.outer_iterations >= 1, "controller_settings.solver.outer_iterations", "must be >= 1");
  check(settings.solver.max_newton_steps >= 1, "controller_settings.solver.max_newton_steps", "must be >= 1");
  check(settings.solver.barrier_factor > 0.0 && settings.solver.barrier_factor < 1.0,
        "controller_settings.solver.barrier_factor", "must lie in (0, 1)");
  if (sweep) {
    check(!sweep->values.empty(), "sweep.values", "must not be empty");
    const auto& names = sweepable_parameters();
    check(std::find(names.begin(), names.end(), sweep->parameter) != names.end(), "sweep.parameter",
          "unknown parameter '" + sweep->parameter + "'");
  }
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  ObjectReader root(doc, "");
  c.name = root.string("name", c.name);

  {
    ObjectReader r(root.at("regime"), "regime");
    if (!r.has("kind")) throw ConfigError(r.field("kind"), "required field is missing");
    c.regime.kind = parse_regime_kind(r.string("kind", ""), r.field("kind"));
    const double gamma = c.regime.kind == RegimeKind::kSeasonal ? 0.2 : 0.3;
    c.regime.rw_sigma = r.number("rw_sigma", 0.0);
    c.regime.decline_rate = r.number("decline_rate", 0.0);
    const std::string form = r.string("decline_form", "geometric");
    if (form == "geometric") {
      c.regime.decline_form = DeclineForm::kGeometric;
    } else if (form == "exponential") {
      c.regime.decline_form = DeclineForm::kExponential;
    } else {
      throw ConfigError(r.field("decline_form"), "expected 'geometric' or 'exponential'");
    }
    c.regime.smooth_lower = r.number("smooth_lower", gamma);
    c.regime.smooth_upper = r.number("smooth_upper", gamma);
    r.finish();
  }

  if (root.has("environment")) {
    ObjectReader r(root.at("environment"), "environment");
    c.env.theta.amplitude = r.number("amplitude", c.env.theta.amplitude);
    c.env.theta.rate = r.number("rate", c.env.theta.rate);
    c.env.theta.shape = r.number("shape", c.env.theta.shape);
    c.env.exec.tracking_rate = r.number("tracking_rate", c.env.exec.tracking_rate);
    c.env.exec.exec_noise_coeff = r.number("exec_noise_coeff", c.env.exec.exec_noise_coeff);
    c.env.exec.obs_noise_sd = r.number("obs_noise_sd", c.env.exec.obs_noise_sd);
    c.env.exec.drift_tracking = r.boolean("drift_tracking", c.env.exec.drift_tracking);
    c.env.weeks_per_quarter = r.integer("weeks_per_quarter", c.env.weeks_per_quarter);
    r.finish();
  }

  if (root.has("history")) {
    ObjectReader r(root.at("history"), "history");
    c.env.history.years = r.integer("years", c.env.history.years);
    c.env.history.annual_budget = r.number("annual_budget", c.env.history.annual_budget);
    c.env.history.annual_amplitude = r.number("annual_amplitude", c.env.history.annual_amplitude);
    c.env.history.annual_peak_day = r.integer("annual_peak_day", c.env.history.annual_peak_day);
    c.env.history.weekday_amplitude = r.number("weekday_amplitude", c.env.history.weekday_amplitude);
    r.finish();
  }

  if (root.has("budget")) {
    ObjectReader r(root.at("budget"), "budget");
    c.env.budget.lambda_lo = r.number("lambda_lo", c.env.budget.lambda_lo);
    c.env.budget.lambda_hi = r.number("lambda_hi", c.env.budget.lambda_hi);
    c.env.budget.quarter = r.integer("quarter", c.env.budget.quarter);
    r.finish();
  }

  {
    const json& list = root.at("controllers");
    if (!list.is_array()) throw ConfigError("controllers", "expected an array of controller names");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string field = "controllers[" + std::to_string(i) + "]";
      if (!list[i].is_string()) throw ConfigError(field, "expected a controller name");
      const auto kind = controller_kind_from_string(list[i].get<std::string>());
      if (!kind) {
        throw ConfigError(field, "unknown controller '" + list[i].get<std::string>() +
                                     "' (baseline, mpc_static, mpc_pf, mpc_seasonal, oracle)");
      }
      c.controllers.push_back(*kind);
    }
  }

  if (root.has("controller_settings")) {
    ObjectReader r(root.at("controller_settings"), "controller_settings");
    ControllerSettings& s = c.settings;
    const std::string pred = r.string("spend_predictor", "identity");
    if (pred == "identity") {
      s.predictor = SpendPredictorKind::kIdentity;
    } else if (pred == "tracking") {
      s.predictor = SpendPredictorKind::kTracking;
    } else {
      throw ConfigError(r.field("spend_predictor"), "expected 'identity' or 'tracking'");
    }
    s.anchor_scale = r.number("anchor_scale", s.anchor_scale);
    s.guardrails = r.boolean("guardrails", s.guardrails);
    s.static_fit_weeks = r.integer("static_fit_weeks", s.static_fit_weeks);
    s.pf_particles = r.integer("pf_particles", s.pf_particles);
    s.pf_spread = r.number("pf_spread", s.pf_spread);
    s.pf_prior_weeks = r.integer("pf_prior_weeks", s.pf_prior_weeks);
    s.pf_rw_sigma = r.number("pf_rw_sigma", s.pf_rw_sigma);
    s.pf_obs_sd_floor = r.number("pf_obs_sd_floor", s.pf_obs_sd_floor);
    s.rolling.window_weeks = r.integer("rolling_window_weeks", s.rolling.window_weeks);
    s.rolling.segment_weeks = r.integer("rolling_segment_weeks", s.rolling.segment_weeks);
    s.rolling.daily = r.boolean("rolling_daily", s.rolling.daily);
    s.rolling.shared_curvature = r.boolean("rolling_shared_curvature", s.rolling.shared_curvature);
    if (r.has("solver")) {
      ObjectReader sr(r.at("solver"), r.field("solver"));
      s.solver.outer_iterations = sr.integer("outer_iterations", s.solver.outer_iterations);
      s.solver.barrier_factor = sr.number("barrier_factor", s.solver.barrier_factor);
      s.solver.max_newton_steps = sr.integer("max_newton_steps", s.solver.max_newton_steps);
      s.solver.kkt_tol = sr.number("kkt_tol", s.solver.kkt_tol);
      s.solver.polish = sr.boolean("polish", s.solver.polish);
      sr.finish();
    }
    r.finish();
  }

  c.n_trials = root.integer("trials", c.n_trials);
  if (root.has("seed")) {
    const json& v = root.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.master_seed = v.get<std::uint64_t>();
  }
  c.bootstrap_reps = root.integer("bootstrap_reps", c.bootstrap_reps);
  c.output_dir = root.string("output_dir", c.output_dir);

  if (root.has("sweep")) {
    ObjectReader r(root.at("sweep"), "sweep");
    SweepSpec sw;
    sw.parameter = r.string("parameter", "");
    const json& vals = r.at("values");
    if (!vals.is_array()) throw ConfigError("sweep.values", "expected an array of numbers");
    for (const auto& v : vals) {
      if (!v.is_number()) throw ConfigError("sweep.values", "expected an array of numbers");
      sw.values.push_back(v.get<double>());
    }
    r.finish();
    c.sweep = sw;
  }
  root.finish();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["regime"] = {{"kind", to_string(c.regime.kind)},
                 {"rw_sigma", c.regime.rw_sigma},
                 {"decline_rate", c.regime.decline_rate},
                 {"decline_form", decline_name(c.regime.decline_form)},
                 {"smooth_lower", c.regime.smooth_lower},
                 {"smooth_upper", c.regime.smooth_upper}};
  j["environment"] = {{"amplitude", c.env.theta.amplitude},
                      {"rate", c.env.theta.rate},
                      {"shape", c.env.theta.shape},
                      {"tracking_rate", c.env.exec.tracking_rate},
                      {"exec_noise_coeff", c.env.exec.exec_noise_coeff},
                      {"obs_noise_sd", c.env.exec.obs_noise_sd},
                      {"drift_tracking", c.env.exec.drift_tracking},
                      {"weeks_per_quarter", c.env.weeks_per_quarter}};
  j["history"] = {{"years", c.env.history.years},
                  {"annual_budget", c.env.history.annual_budget},
                  {"annual_amplitude", c.env.history.annual_amplitude},
                  {"annual_peak_day", c.env.history.annual_peak_day},
                  {"weekday_amplitude", c.env.history.weekday_amplitude}};
  j["budget"] = {{"lambda_lo", c.env.budget.lambda_lo},
                 {"lambda_hi", c.env.budget.lambda_hi},
                 {"quarter", c.env.budget.quarter}};
  j["controllers"] = json::array();
  for (auto k : c.controllers) j["controllers"].push_back(std::string(to_string(k)));
  const ControllerSettings& s = c.settings;
  j["controller_settings"] = {
      {"spend_predictor", s.predictor == SpendPredictorKind::kTracking ? "tracking" : "identity"},
      {"anchor_scale", s.anchor_scale},
      {"guardrails", s.guardrails},
      {"static_fit_weeks", s.static_fit_weeks},
      {"pf_particles", s.pf_particles},
      {"pf_spread", s.pf_spread},
      {"pf_prior_weeks", s.pf_prior_weeks},
      {"pf_rw_sigma", s.pf_rw_sigma},
      {"pf_obs_sd_floor", s.pf_obs_sd_floor},
      {"rolling_window_weeks", s.rolling.window_weeks},
      {"rolling_segment_weeks", s.rolling.segment_weeks},
      {"rolling_daily", s.rolling.daily},
      {"rolling_shared_curvature", s.rolling.shared_curvature},
      {"solver",
       {{"outer_iterations", s.solver.outer_iterations},
        {"barrier_factor", s.solver.barrier_factor},
        {"max_newton_steps", s.solver.max_newton_steps},
        {"kkt_tol", s.solver.kkt_tol},
        {"polish", s.solver.polish}}}};
  j["trials"] = c.n_trials;
  j["seed"] = c.master_seed;
  j["bootstrap_reps"] = c.bootstrap_reps;
  j["output_dir"] = c.output_dir;
  if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
  return j;
}

const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names = {
      "decline_rate", "rw_sigma",       "smooth_lower",  "smooth_upper",     "amplitude", "rate",
      "shape",        "tracking_rate",  "obs_noise_sd",  "exec_noise_coeff", "lambda_lo", "lambda_hi"};
  return names;
}

void apply_parameter(ExperimentConfig& c, const std::string& name, double value) {
  if (name == "decline_rate") {
    c.regime.decline_rate = value;
  } else if (name == "rw_sigma") {
    c.regime.rw_sigma = value;
  } else if (name == "smooth_lower") {
    c.regime.smooth_lower = value;
  } else if (name == "smooth_upper") {
    c.regime.smooth_upper = value;
  } else if (name == "amplitude") {
    c.env.theta.amplitude = value;
  } else if (name == "rate") {
    c.env.theta.rate = value;
  } else if (name == "shape") {
    c.env.theta.shape = value;
  } else if (name == "tracking_rate") {
    c.env.exec.tracking_rate = value;
  } else if (name == "obs_noise_sd") {
    c.env.exec.obs_noise_sd = value;
  } else if (name == "exec_noise_coeff") {
    c.env.exec.exec_noise_coeff = value;
  } else if (name == "lambda_lo") {
    c.env.budget.lambda_lo = value;
  } else if (name == "lambda_hi") {
    c.env.budget.lambda_hi = value;
  } else {
    throw ConfigError(name, "not a sweepable parameter");
  }
  c.validate();
}

}  // namespace budgetlab
