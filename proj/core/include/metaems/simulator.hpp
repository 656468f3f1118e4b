#pragma once

#include <Eigen/Dense>

#include <array>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metaems/seeding.hpp"

namespace metaems::sim {

// Hourly simulation step, in hours.
inline constexpr double kStepHours = 1.0;

struct BuildingConfig {
  double solar_scale = 1.0;
  double battery_capacity_kwh = 80.0;
  double battery_max_power_kw = 20.0;
  double charge_efficiency = 0.95;
  double discharge_efficiency = 0.95;
  double hvac_max_power_kw = 5.0;
  double hvac_cop = 3.0;
  // Heat-pump supply-water targets. Sampled and carried, but the indoor
  // thermostat uses the comfort setpoints below.
  double heat_target_c = 46.0;
  double cool_target_c = 8.0;
  double indoor_heat_setpoint_c = 20.0;
  double indoor_cool_setpoint_c = 24.0;
  double thermal_resistance = 2.0;   // degC / kW
  double thermal_capacitance = 5.0;  // kWh / degC
  double water_heater_efficiency = 0.9;
  double dhw_tank_capacity = 3.0;    // inert
  double initial_soc_fraction = 0.0;
  double initial_indoor_temp_c = 22.0;

  // Throws InvalidRange when a field is outside its physical domain.
  void Validate() const;
};

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Sampling ranges for building heterogeneity: installed solar, heat-pump
// targets, DHW tank, battery capacity and water-heater efficiency.
struct BuildingRanges {
  ParamRange solar_scale{0.5, 1.5};
  ParamRange heat_target_c{42.0, 50.0};
  ParamRange cool_target_c{6.0, 10.0};
  ParamRange dhw_tank_capacity{2.0, 4.0};
  ParamRange battery_capacity_kwh{0.0, 160.0};
  ParamRange water_heater_efficiency{0.7, 0.95};
};

// Uniform draw of every ranged field; remaining fields keep `base` values
// except battery_max_power_kw, which follows capacity / 4.
BuildingConfig SampleBuildingConfig(const BuildingRanges& ranges, Rng& rng, const BuildingConfig& base = {});

struct TraceRow {
  int hour_index = 0;
  double renewable_output_kw = 0.0;
  double nonshiftable_load_kw = 0.0;
  double outdoor_temp_c = 0.0;
  double price_per_kwh = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

using Trace = std::vector<TraceRow>;

struct ZoneProfile {
  int zone_id = 1;
  std::string name;
  double temp_mean_c = 15.0;
  double temp_annual_amplitude_c = 10.0;
  double temp_daily_amplitude_c = 5.0;
  double temp_noise_c = 1.0;
  double load_base_kw = 24.0;
  double load_morning_peak_kw = 12.0;
  double load_evening_peak_kw = 18.0;
  double load_noise_fraction = 0.08;
  double solar_peak_kw = 26.0;
  double price_offpeak = 0.20;
  double price_peak = 0.45;
  int peak_start_hour = 12;
  int peak_end_hour = 20;  // exclusive
};

inline constexpr int kNumZones = 4;

// Built-in parameter table, identical to configs/zones.ini.
ZoneProfile DefaultZoneProfile(int zone_id);
std::array<ZoneProfile, kNumZones> DefaultZoneProfiles();

// Reads the versioned zone table (INI). Throws ConfigError / IoError.
std::array<ZoneProfile, kNumZones> LoadZoneProfiles(const std::filesystem::path& path);
inline constexpr int kZoneTableVersion = 1;

// Deterministic in (profile, length, rng state, solar_scale).
Trace GenerateTrace(const ZoneProfile& zone, int length, Rng& rng, double solar_scale);

// CSV with header `hour,renewable_kw,load_kw,outdoor_c,price`. Values are
// written with 17 significant digits so a re-read trace is bit-identical.
void WriteTraceCsv(const std::filesystem::path& path, const Trace& trace);
Trace ReadTraceCsv(const std::filesystem::path& path);
inline constexpr const char* kTraceCsvHeader = "hour,renewable_kw,load_kw,outdoor_c,price";

struct Action {
  double esu_command = 0.0;   // [-1, 1], negative discharges
  double hvac_command = 0.0;  // [0, 1]

  Action Clamped() const;
  friend bool operator==(const Action&, const Action&) = default;
};

struct RewardConfig {
  double mu = 0.5;
  double eta = 0.5;
  int window_w = 5;
  // Weight on indoor comfort violation (degC outside the setpoint band).
  // Zero keeps the reward to the cost and ramping terms only.
  double comfort_weight = 0.0;

  void Validate() const;
};

struct EsuResult {
  double new_soc_kwh;
  double realized_power_kw;  // grid side, signed
};

EsuResult EsuUpdate(double soc_kwh, double esu_command, const BuildingConfig& cfg);

struct ThermalResult {
  double new_indoor_temp_c;
  double realized_hvac_power_kw;
};

ThermalResult ThermalUpdate(double indoor_temp_c, const TraceRow& row, double hvac_command,
                            const BuildingConfig& cfg);

inline double NetConsumption(double load_kw, double hvac_kw, double esu_kw, double renewable_kw) {
  return load_kw + hvac_kw + esu_kw - renewable_kw;
}

struct RewardTerms {
  double reward;
  double cost_c1;
  double ramp_c2;
};

// `e_window` ends at the current net consumption; ramping sums the absolute
// differences of at most W consecutive pairs at its tail.
RewardTerms ComputeReward(std::span<const double> e_window, double price, const RewardConfig& cfg);

// Degrees outside [indoor_heat_setpoint_c, indoor_cool_setpoint_c].
double ComfortViolation(double indoor_temp_c, const BuildingConfig& cfg);

struct BuildingState {
  int hour_index = 0;
  double soc_kwh = 0.0;
  double indoor_temp_c = 22.0;
  std::deque<double> net_window;  // at most W + 1 most recent e values
  double last_esu_power_kw = 0.0;
  double last_hvac_power_kw = 0.0;
  double last_net_consumption_kw = 0.0;
  // Sum of |delta e| that will still be inside the ramp window next step.
  double ramp_carry_kw = 0.0;
};

struct Transition {
  Eigen::VectorXd state;
  Action action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  double cost_term_c1 = 0.0;
  double ramp_term_c2 = 0.0;
  double comfort_term = 0.0;
  double net_consumption_e = 0.0;
  double realized_esu_power_c = 0.0;
  double realized_hvac_power_h = 0.0;
};

// Feature scaling for the flattened observation.
struct ObservationScale {
  double power_kw = 50.0;
  double temp_center_c = 15.0;
  double temp_span_c = 10.0;
  double price = 0.5;
  double indoor_center_c = 22.0;
  double indoor_span_c = 5.0;
};

// [p, b, T_out, v, c_prev, h_prev, sin(hod), cos(hod), soc, T_in, e_prev, ramp_carry]
inline constexpr int kObservationDim = 12;
inline constexpr int kActionDim = 2;

Eigen::VectorXd Observe(const BuildingState& state, const TraceRow& row, const BuildingConfig& cfg,
                        const ObservationScale& scale);

BuildingState InitialState(const BuildingConfig& cfg);

// One hourly transition using trace row state.hour_index. Throws
// EpisodeExhausted once every row has been consumed.
std::pair<BuildingState, Transition> Step(const BuildingState& state, const Action& action,
                                          const BuildingConfig& cfg, const RewardConfig& reward_cfg,
                                          std::span<const TraceRow> trace, const ObservationScale& scale = {});

// One building: physical parameters plus its exogenous trace.
struct BuildingSpec {
  std::string id;
  BuildingConfig config;
  Trace trace;
};

class BuildingEnv {
 public:
  BuildingEnv(BuildingConfig cfg, RewardConfig reward_cfg, Trace trace, ObservationScale scale = {});
  BuildingEnv(const BuildingSpec& spec, RewardConfig reward_cfg, ObservationScale scale = {})
      : BuildingEnv(spec.config, reward_cfg, spec.trace, scale) {}

  void Reset();
  Transition Step(const Action& action);
  Eigen::VectorXd Observe() const;

  bool Done() const { return state_.hour_index >= horizon(); }
  int horizon() const { return static_cast<int>(trace_.size()); }
  int remaining() const { return horizon() - state_.hour_index; }
  int hour_index() const { return state_.hour_index; }
  int hour_of_day() const { return state_.hour_index % 24; }

  const BuildingState& state() const { return state_; }
  const TraceRow& current_row() const;
  const BuildingConfig& config() const { return cfg_; }
  const RewardConfig& reward_config() const { return reward_cfg_; }
  const Trace& trace() const { return trace_; }
  const ObservationScale& observation_scale() const { return scale_; }

 private:
  BuildingConfig cfg_;
  RewardConfig reward_cfg_;
  Trace trace_;
  ObservationScale scale_;
  BuildingState state_;
};

}  // namespace metaems::sim
