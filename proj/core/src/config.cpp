#include "metaems/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "metaems/errors.hpp"

namespace metaems::config {
namespace {

namespace pt = boost::property_tree;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long ParseInt(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t ParseU64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<int> ParseIntList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : SplitList(v)) out.push_back(static_cast<int>(ParseInt(key, item)));
  return out;
}

std::string JoinInts(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

sim::ParamRange ParseRange(const std::string& key, const std::string& v) {
  const auto parts = SplitList(v);
  if (parts.size() != 2) throw ConfigError(key + ": expected 'lo,hi', got '" + v + "'");
  return {ParseDouble(key, parts[0]), ParseDouble(key, parts[1])};
}

std::string FormatRange(const sim::ParamRange& r) { return FormatDouble(r.lo) + "," + FormatDouble(r.hi); }

std::string FormatBool(bool b) { return b ? "true" : "false"; }

struct Binding {
  std::string key;
  std::string description;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define METAEMS_DOUBLE(KEY, FIELD, DESC)                                                       \
  Binding {                                                                                          \
    KEY, DESC, [](ExperimentConfig& c, const std::string& v) { c.FIELD = ParseDouble(KEY, v); }, \
        [](const ExperimentConfig& c) { return FormatDouble(c.FIELD); }                              \
  }
#define METAEMS_INT(KEY, FIELD, DESC)                                                                   \
  Binding {                                                                                                   \
    KEY, DESC,                                                                                        \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = static_cast<int>(ParseInt(KEY, v)); },      \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                                     \
  }
#define METAEMS_BOOL(KEY, FIELD, DESC)                                                      \
  Binding {                                                                                       \
    KEY, DESC, [](ExperimentConfig& c, const std::string& v) { c.FIELD = ParseBool(KEY, v); }, \
        [](const ExperimentConfig& c) { return FormatBool(c.FIELD); }                             \
  }
#define METAEMS_RANGE(KEY, FIELD, DESC)                                                                 \
  Binding {                                                                                           \
    KEY, DESC, [](ExperimentConfig& c, const std::string& v) { c.FIELD = ParseRange(KEY, v); }, \
        [](const ExperimentConfig& c) { return FormatRange(c.FIELD); }                                \
  }

const std::vector<Binding>& Bindings() {
  static const std::vector<Binding> table = {
      Binding{"experiment.name", "Run label echoed into the summary",
              [](ExperimentConfig& c, const std::string& v) { c.name = v; },
              [](const ExperimentConfig& c) { return c.name; }},
      Binding{"experiment.master_seed", "Root of every derived seed",
              [](ExperimentConfig& c, const std::string& v) { c.master_seed = ParseU64("experiment.master_seed", v); },
              [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }},
      METAEMS_INT("experiment.n_repeat_seeds", n_repeat_seeds, "Independent repeats per zone"),
      Binding{"experiment.zones", "Comma-separated climate zone ids (1-4)",
              [](ExperimentConfig& c, const std::string& v) { c.zones = ParseIntList("experiment.zones", v); },
              [](const ExperimentConfig& c) { return JoinInts(c.zones); }},
      Binding{"experiment.zone_table", "Zone parameter table (INI); empty = built-in",
              [](ExperimentConfig& c, const std::string& v) { c.zone_table = v; },
              [](const ExperimentConfig& c) { return c.zone_table; }},
      Binding{"experiment.rbc_table", "RBC rule table (CSV); empty = built-in",
              [](ExperimentConfig& c, const std::string& v) { c.rbc_table = v; },
              [](const ExperimentConfig& c) { return c.rbc_table; }},
      METAEMS_INT("experiment.n_source_buildings", n_source_buildings, "Training buildings per zone"),
      METAEMS_INT("experiment.n_target_buildings", n_target_buildings, "Held-out test buildings per zone"),
      METAEMS_INT("experiment.episode_length", episode_length, "Hours per episode"),
      METAEMS_INT("experiment.test_episodes", test_episodes, "Adaptation episodes on each target building"),
      Binding{"experiment.building_sampling",
              "catalog = one fixed building set per zone; resample = new set per repeat",
              [](ExperimentConfig& c, const std::string& v) {
                if (v == "catalog") {
                  c.building_sampling = BuildingSampling::kCatalog;
                } else if (v == "resample") {
                  c.building_sampling = BuildingSampling::kResample;
                } else {
                  throw ConfigError("experiment.building_sampling: expected catalog or resample, got '" + v + "'");
                }
              },
              [](const ExperimentConfig& c) {
                return std::string(c.building_sampling == BuildingSampling::kCatalog ? "catalog" : "resample");
              }},
      Binding{"experiment.output_dir", "Output directory; CLI flag and METAEMS_OUTPUT_DIR take precedence",
              [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
              [](const ExperimentConfig& c) { return c.output_dir; }},
      METAEMS_RANGE("ranges.solar_scale", ranges.solar_scale, "Installed solar multiplier"),
      METAEMS_RANGE("ranges.heat_target_c", ranges.heat_target_c, "Heat-pump heating supply target (inert)"),
      METAEMS_RANGE("ranges.cool_target_c", ranges.cool_target_c, "Heat-pump cooling supply target (inert)"),
      METAEMS_RANGE("ranges.dhw_tank_capacity", ranges.dhw_tank_capacity, "DHW tank capacity (inert)"),
      METAEMS_RANGE("ranges.battery_capacity_kwh", ranges.battery_capacity_kwh, "Battery capacity, kWh"),
      METAEMS_RANGE("ranges.water_heater_efficiency", ranges.water_heater_efficiency, "Water heater efficiency"),
      METAEMS_DOUBLE("building.charge_efficiency", building_defaults.charge_efficiency, "ESU charge efficiency"),
      METAEMS_DOUBLE("building.discharge_efficiency", building_defaults.discharge_efficiency,
                     "ESU discharge efficiency"),
      METAEMS_DOUBLE("building.hvac_max_power_kw", building_defaults.hvac_max_power_kw, "HVAC electrical rating"),
      METAEMS_DOUBLE("building.hvac_cop", building_defaults.hvac_cop, "HVAC coefficient of performance"),
      METAEMS_DOUBLE("building.indoor_heat_setpoint_c", building_defaults.indoor_heat_setpoint_c,
                     "Lower comfort bound; heating below it"),
      METAEMS_DOUBLE("building.indoor_cool_setpoint_c", building_defaults.indoor_cool_setpoint_c,
                     "Upper comfort bound; cooling above it"),
      METAEMS_DOUBLE("building.thermal_resistance", building_defaults.thermal_resistance, "RC model R, degC/kW"),
      METAEMS_DOUBLE("building.thermal_capacitance", building_defaults.thermal_capacitance,
                     "RC model C, kWh/degC"),
      METAEMS_DOUBLE("building.initial_soc_fraction", building_defaults.initial_soc_fraction,
                     "Battery state of charge at reset"),
      METAEMS_DOUBLE("building.initial_indoor_temp_c", building_defaults.initial_indoor_temp_c,
                     "Indoor temperature at reset"),
      METAEMS_BOOL("methods.no_control", methods.no_control, "Run the thermostat-only baseline"),
      METAEMS_BOOL("methods.rbc", methods.rbc, "Report the RBC rows (always used for normalization)"),
      METAEMS_BOOL("methods.random_init", methods.random_init, "Run the from-scratch agent"),
      METAEMS_BOOL("methods.pretrained", methods.pretrained, "Run the pretrained-pool baseline"),
      METAEMS_BOOL("methods.maml", methods.maml, "Run the episodic MAML baseline"),
      METAEMS_BOOL("methods.rl_mpc", methods.rl_mpc, "Run the model-based planner"),
      METAEMS_BOOL("methods.metaems", methods.metaems, "Run the meta-learned agent"),
      METAEMS_INT("meta.t_theta", meta.t_theta, "Steps per building-level interval"),
      METAEMS_INT("meta.rounds", meta.rounds, "Meta-training rounds; 0 = about two episodes per source"),
      METAEMS_INT("meta.building_batch_size", meta.building_batch_size, "Buildings sampled per round"),
      METAEMS_DOUBLE("meta.meta_lr_critic", meta.meta_lr_critic, "Group-level critic step size"),
      METAEMS_DOUBLE("meta.meta_lr_actor", meta.meta_lr_actor, "Group-level actor step size"),
      METAEMS_INT("meta.meta_batches", meta.meta_batches, "Fresh batches per building per group update"),
      METAEMS_BOOL("meta.reset_buffers_each_round", meta.reset_buffers_each_round,
                   "Clear per-building buffers between rounds"),
      METAEMS_BOOL("meta.explore", meta.explore, "Gaussian exploration during meta-training"),
      METAEMS_DOUBLE("agent.gamma", agent.gamma, "Discount factor"),
      METAEMS_INT("agent.batch_size", agent.batch_size, "Minibatch size"),
      METAEMS_DOUBLE("agent.lr_actor", agent.lr_actor, "Actor step size"),
      METAEMS_DOUBLE("agent.lr_critic", agent.lr_critic, "Critic step size"),
      METAEMS_DOUBLE("agent.tau", agent.tau, "Target network smoothing"),
      METAEMS_DOUBLE("agent.exploration_noise_sigma", agent.exploration_noise_sigma, "Action noise std"),
      METAEMS_INT("agent.buffer_capacity", agent.buffer_capacity, "Replay buffer capacity"),
      Binding{"agent.hidden_sizes", "Hidden layer widths",
              [](ExperimentConfig& c, const std::string& v) { c.agent.hidden_sizes = ParseIntList("agent.hidden_sizes", v); },
              [](const ExperimentConfig& c) { return JoinInts(c.agent.hidden_sizes); }},
      METAEMS_DOUBLE("agent.reward_scale", agent.reward_scale, "Multiplier on rewards in the TD target"),
      METAEMS_DOUBLE("reward.mu", reward.mu, "Weight of the cost term"),
      METAEMS_DOUBLE("reward.eta", reward.eta, "Weight of the ramping term"),
      METAEMS_INT("reward.window_w", reward.window_w, "Ramping window length"),
      METAEMS_DOUBLE("reward.comfort_weight", reward.comfort_weight, "Comfort violation penalty"),
      METAEMS_INT("maml.epochs", maml.epochs, "Passes over each collected episode"),
      METAEMS_INT("pretrained.pool_size", pretrained.pool_size, "Pretrained models; 0 = one per source"),
      METAEMS_INT("pretrained.episodes", pretrained.episodes, "Training episodes per pool model"),
      METAEMS_INT("rl_mpc.horizon", rl_mpc.horizon, "Planning horizon, hours"),
      METAEMS_INT("rl_mpc.candidates", rl_mpc.candidates, "Random action sequences per decision"),
      METAEMS_INT("rl_mpc.warmup_hours", rl_mpc.warmup_hours, "Random exploration before the first fit"),
      METAEMS_INT("rl_mpc.refit_every_hours", rl_mpc.refit_every_hours, "Model refit period"),
      METAEMS_INT("rl_mpc.fit_epochs", rl_mpc.fit.epochs, "Epochs for the first fit"),
      METAEMS_INT("rl_mpc.refit_epochs", rl_mpc.refit_epochs, "Epochs per refit"),
      METAEMS_DOUBLE("rl_mpc.learning_rate", rl_mpc.fit.learning_rate, "Model step size"),
      METAEMS_INT("rl_mpc.batch_size", rl_mpc.fit.batch_size, "Model minibatch size"),
      Binding{"rl_mpc.hidden_sizes", "Model hidden layer widths",
              [](ExperimentConfig& c, const std::string& v) {
                c.rl_mpc.fit.hidden_sizes = ParseIntList("rl_mpc.hidden_sizes", v);
              },
              [](const ExperimentConfig& c) { return JoinInts(c.rl_mpc.fit.hidden_sizes); }},
  };
  return table;
}

#undef METAEMS_DOUBLE
#undef METAEMS_INT
#undef METAEMS_BOOL
#undef METAEMS_RANGE

const Binding* FindBinding(const std::string& key) {
  for (const auto& b : Bindings()) {
    if (b.key == key) return &b;
  }
  return nullptr;
}

void Flatten(const pt::ptree& tree, const std::string& prefix, FlatConfig& out, std::string_view origin) {
  for (const auto& [name, child] : tree) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (child.empty()) {
      if (prefix.empty()) throw ConfigError(std::string(origin) + ": key '" + key + "' must live in a section");
      if (!FindBinding(key)) throw ConfigError(std::string(origin) + ": unknown key '" + key + "'");
      out[key] = Trim(child.data());
    } else {
      Flatten(child, key, out, origin);
    }
  }
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

const std::vector<KeySpec>& KeyTable() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> out;
    const ExperimentConfig defaults;
    for (const auto& b : Bindings()) out.push_back({b.key, b.get(defaults), b.description});
    return out;
  }();
  return table;
}

std::string DescribeKeys() {
  std::ostringstream out;
  out << "Config keys (INI sections; override with --set section.key=value):\n";
  for (const auto& k : KeyTable()) {
    out << "  " << k.key << " = " << (k.default_value.empty() ? "\"\"" : k.default_value) << "\n      " << k.description << "\n";
  }
  return out.str();
}

void ExperimentConfig::Validate() const {
  if (n_repeat_seeds < 1) throw ConfigError("experiment.n_repeat_seeds must be >= 1");
  if (zones.empty()) throw ConfigError("experiment.zones is empty");
  std::set<int> seen;
  for (int z : zones) {
    if (z < 1 || z > sim::kNumZones) throw ConfigError("experiment.zones: zone " + std::to_string(z) + " not in 1..4");
    if (!seen.insert(z).second) throw ConfigError("experiment.zones: zone " + std::to_string(z) + " listed twice");
  }
  if (n_source_buildings < 1) throw ConfigError("experiment.n_source_buildings must be >= 1");
  if (n_target_buildings < 1) throw ConfigError("experiment.n_target_buildings must be >= 1");
  if (episode_length < 720) {
    throw ConfigError("experiment.episode_length must be >= 720 (one month for the load factor)");
  }
  if (test_episodes < 1) throw ConfigError("experiment.test_episodes must be >= 1");
  if (pretrained.pool_size < 0 || pretrained.pool_size > n_source_buildings) {
    throw ConfigError("pretrained.pool_size must be in [0, n_source_buildings]");
  }
  if (pretrained.episodes < 1) throw ConfigError("pretrained.episodes must be >= 1");
  if (maml.epochs < 1) throw ConfigError("maml.epochs must be >= 1");
  if (rl_mpc.horizon < 1 || rl_mpc.candidates < 1 || rl_mpc.warmup_hours < 1 || rl_mpc.refit_every_hours < 1 ||
      rl_mpc.fit.epochs < 1 || rl_mpc.refit_epochs < 0 || rl_mpc.fit.batch_size < 1 ||
      !(rl_mpc.fit.learning_rate > 0.0)) {
    throw ConfigError("rl_mpc settings must be positive");
  }
  if (meta.building_batch_size > n_source_buildings) {
    throw ConfigError("meta.building_batch_size exceeds experiment.n_source_buildings");
  }
  try {
    meta.Validate(episode_length);
    agent.Validate();
    reward.Validate();
    building_defaults.Validate();
    for (const auto* r : {&ranges.solar_scale, &ranges.heat_target_c, &ranges.cool_target_c,
                          &ranges.dhw_tank_capacity, &ranges.battery_capacity_kwh, &ranges.water_heater_efficiency}) {
      if (r->lo > r->hi) throw ConfigError("a ranges.* entry has lo > hi");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

FlatConfig ParseFlatConfig(std::string_view text, std::string_view origin) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string(origin) + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  FlatConfig out;
  Flatten(tree, "", out, origin);
  return out;
}

FlatConfig ReadFlatConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseFlatConfig(buf.str(), path.string());
}

void ApplyOverrides(FlatConfig& flat, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = Trim(std::string_view(o).substr(0, eq));
    if (!FindBinding(key)) throw ConfigError("override names unknown key '" + key + "'");
    flat[key] = Trim(std::string_view(o).substr(eq + 1));
  }
}

ExperimentConfig FromFlat(const FlatConfig& flat) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : flat) {
    const auto* b = FindBinding(key);
    if (!b) throw ConfigError("unknown key '" + key + "'");
    b->set(cfg, value);
  }
  cfg.Validate();
  return cfg;
}

FlatConfig ToFlat(const ExperimentConfig& cfg) {
  FlatConfig out;
  for (const auto& b : Bindings()) out[b.key] = b.get(cfg);
  return out;
}

std::string ToIni(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& b : Bindings()) {
    const auto dot = b.key.find('.');
    const std::string sec = b.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << b.key.substr(dot + 1) << " = " << b.get(cfg) << "\n";
  }
  return out.str();
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  FlatConfig flat = ReadFlatConfig(path);
  ApplyOverrides(flat, overrides);
  return FromFlat(flat);
}

}  // namespace metaems::config
