#include "metaems/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "metaems/errors.hpp"

namespace metaems::sim {

namespace {

void RequireRange(const ParamRange& r, const char* name) {
  if (!(r.lo <= r.hi)) throw InvalidRange(std::string(name) + ": lo > hi");
}

void RequireFraction(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) throw InvalidRange(std::string(name) + " must be in (0, 1]");
}

void RequireNonNegative(double v, const char* name) {
  if (!(v >= 0.0)) throw InvalidRange(std::string(name) + " must be >= 0");
}

}  // namespace

void BuildingConfig::Validate() const {
  RequireNonNegative(solar_scale, "solar_scale");
  RequireNonNegative(battery_capacity_kwh, "battery_capacity_kwh");
  RequireNonNegative(battery_max_power_kw, "battery_max_power_kw");
  RequireNonNegative(hvac_max_power_kw, "hvac_max_power_kw");
  RequireNonNegative(dhw_tank_capacity, "dhw_tank_capacity");
  RequireFraction(charge_efficiency, "charge_efficiency");
  RequireFraction(discharge_efficiency, "discharge_efficiency");
  RequireFraction(water_heater_efficiency, "water_heater_efficiency");
  if (!(hvac_cop > 0.0)) throw InvalidRange("hvac_cop must be > 0");
  if (!(thermal_resistance > 0.0) || !(thermal_capacitance > 0.0)) {
    throw InvalidRange("thermal resistance and capacitance must be > 0");
  }
  // A time constant below one step would make the explicit update overshoot.
  if (thermal_resistance * thermal_capacitance < kStepHours) {
    throw InvalidRange("thermal time constant R*C must be at least one step");
  }
  if (!(indoor_heat_setpoint_c <= indoor_cool_setpoint_c)) {
    throw InvalidRange("indoor heat setpoint must not exceed the cool setpoint");
  }
  if (!(initial_soc_fraction >= 0.0 && initial_soc_fraction <= 1.0)) {
    throw InvalidRange("initial_soc_fraction must be in [0, 1]");
  }
}

BuildingConfig SampleBuildingConfig(const BuildingRanges& ranges, Rng& rng, const BuildingConfig& base) {
  RequireRange(ranges.solar_scale, "solar_scale");
  RequireRange(ranges.heat_target_c, "heat_target_c");
  RequireRange(ranges.cool_target_c, "cool_target_c");
  RequireRange(ranges.dhw_tank_capacity, "dhw_tank_capacity");
  RequireRange(ranges.battery_capacity_kwh, "battery_capacity_kwh");
  RequireRange(ranges.water_heater_efficiency, "water_heater_efficiency");
  BuildingConfig cfg = base;
  auto draw = [&rng](const ParamRange& r) { return UniformIn(rng, r.lo, r.hi); };
  cfg.solar_scale = draw(ranges.solar_scale);
  cfg.heat_target_c = draw(ranges.heat_target_c);
  cfg.cool_target_c = draw(ranges.cool_target_c);
  cfg.dhw_tank_capacity = draw(ranges.dhw_tank_capacity);
  cfg.battery_capacity_kwh = draw(ranges.battery_capacity_kwh);
  cfg.water_heater_efficiency = draw(ranges.water_heater_efficiency);
  cfg.battery_max_power_kw = cfg.battery_capacity_kwh / 4.0;
  return cfg;
}

Action Action::Clamped() const {
  return {std::clamp(esu_command, -1.0, 1.0), std::clamp(hvac_command, 0.0, 1.0)};
}

void RewardConfig::Validate() const {
  if (!(mu >= 0.0) || !(eta >= 0.0) || !(comfort_weight >= 0.0)) {
    throw InvalidRange("reward weights must be >= 0");
  }
  if (window_w < 1) throw InvalidRange("reward window W must be >= 1");
}

EsuResult EsuUpdate(double soc_kwh, double esu_command, const BuildingConfig& cfg) {
  const double command = std::clamp(esu_command, -1.0, 1.0);
  const double capacity = cfg.battery_capacity_kwh;
  const double soc = std::clamp(soc_kwh, 0.0, capacity);
  const double power = std::abs(command) * cfg.battery_max_power_kw;
  if (command > 0.0) {
    const double new_soc = std::min(capacity, soc + cfg.charge_efficiency * power * kStepHours);
    return {new_soc, (new_soc - soc) / cfg.charge_efficiency / kStepHours};
  }
  if (command < 0.0) {
    const double new_soc = std::max(0.0, soc - power * kStepHours / cfg.discharge_efficiency);
    return {new_soc, -(soc - new_soc) * cfg.discharge_efficiency / kStepHours};
  }
  return {soc, 0.0};
}

ThermalResult ThermalUpdate(double indoor_temp_c, const TraceRow& row, double hvac_command,
                            const BuildingConfig& cfg) {
  const double h = std::clamp(hvac_command, 0.0, 1.0) * cfg.hvac_max_power_kw;
  const bool cooling = indoor_temp_c > cfg.indoor_cool_setpoint_c;
  const double relax =
      kStepHours / (cfg.thermal_resistance * cfg.thermal_capacitance) * (row.outdoor_temp_c - indoor_temp_c);
  const double forcing = cfg.hvac_cop * h * kStepHours / cfg.thermal_capacitance;
  return {indoor_temp_c + relax + (cooling ? -forcing : forcing), h};
}

RewardTerms ComputeReward(std::span<const double> e_window, double price, const RewardConfig& cfg) {
  if (e_window.empty()) return {0.0, 0.0, 0.0};
  const double e = e_window.back();
  const double c1 = price * e;
  const std::size_t pairs = std::min<std::size_t>(static_cast<std::size_t>(cfg.window_w), e_window.size() - 1);
  double c2 = 0.0;
  for (std::size_t k = e_window.size() - pairs; k < e_window.size(); ++k) {
    c2 += std::abs(e_window[k] - e_window[k - 1]);
  }
  return {-cfg.mu * c1 - cfg.eta * c2, c1, c2};
}

double ComfortViolation(double indoor_temp_c, const BuildingConfig& cfg) {
  if (indoor_temp_c < cfg.indoor_heat_setpoint_c) return cfg.indoor_heat_setpoint_c - indoor_temp_c;
  if (indoor_temp_c > cfg.indoor_cool_setpoint_c) return indoor_temp_c - cfg.indoor_cool_setpoint_c;
  return 0.0;
}

Eigen::VectorXd Observe(const BuildingState& state, const TraceRow& row, const BuildingConfig& cfg,
                        const ObservationScale& scale) {
  const double hod = static_cast<double>(state.hour_index % 24);
  const double angle = 2.0 * std::numbers::pi * hod / 24.0;
  Eigen::VectorXd obs(kObservationDim);
  obs << row.renewable_output_kw / scale.power_kw,
      row.nonshiftable_load_kw / scale.power_kw,
      (row.outdoor_temp_c - scale.temp_center_c) / scale.temp_span_c,
      row.price_per_kwh / scale.price,
      cfg.battery_max_power_kw > 0.0 ? state.last_esu_power_kw / cfg.battery_max_power_kw : 0.0,
      cfg.hvac_max_power_kw > 0.0 ? state.last_hvac_power_kw / cfg.hvac_max_power_kw : 0.0,
      std::sin(angle),
      std::cos(angle),
      cfg.battery_capacity_kwh > 0.0 ? state.soc_kwh / cfg.battery_capacity_kwh : 0.0,
      (state.indoor_temp_c - scale.indoor_center_c) / scale.indoor_span_c,
      state.last_net_consumption_kw / scale.power_kw,
      state.ramp_carry_kw / scale.power_kw;
  return obs;
}

BuildingState InitialState(const BuildingConfig& cfg) {
  BuildingState s;
  s.soc_kwh = cfg.initial_soc_fraction * cfg.battery_capacity_kwh;
  s.indoor_temp_c = cfg.initial_indoor_temp_c;
  return s;
}

std::pair<BuildingState, Transition> Step(const BuildingState& state, const Action& action,
                                          const BuildingConfig& cfg, const RewardConfig& reward_cfg,
                                          std::span<const TraceRow> trace, const ObservationScale& scale) {
  const int horizon = static_cast<int>(trace.size());
  if (state.hour_index < 0 || state.hour_index >= horizon) {
    throw EpisodeExhausted("no trace row for hour " + std::to_string(state.hour_index) + " (horizon " +
                           std::to_string(horizon) + ")");
  }
  const TraceRow& row = trace[static_cast<std::size_t>(state.hour_index)];
  const Action a = action.Clamped();

  Transition tr;
  tr.state = Observe(state, row, cfg, scale);
  tr.action = a;

  const EsuResult esu = EsuUpdate(state.soc_kwh, a.esu_command, cfg);
  const ThermalResult thermal = ThermalUpdate(state.indoor_temp_c, row, a.hvac_command, cfg);
  const double e =
      NetConsumption(row.nonshiftable_load_kw, thermal.realized_hvac_power_kw, esu.realized_power_kw,
                     row.renewable_output_kw);

  BuildingState next = state;
  next.soc_kwh = esu.new_soc_kwh;
  next.indoor_temp_c = thermal.new_indoor_temp_c;
  next.last_esu_power_kw = esu.realized_power_kw;
  next.last_hvac_power_kw = thermal.realized_hvac_power_kw;
  next.last_net_consumption_kw = e;
  next.net_window.push_back(e);
  while (next.net_window.size() > static_cast<std::size_t>(reward_cfg.window_w) + 1) next.net_window.pop_front();
  next.hour_index = state.hour_index + 1;

  const std::vector<double> window(next.net_window.begin(), next.net_window.end());
  next.ramp_carry_kw = 0.0;
  const std::size_t keep = std::min<std::size_t>(window.size(), static_cast<std::size_t>(reward_cfg.window_w));
  for (std::size_t k = window.size() - keep + 1; k < window.size(); ++k) {
    next.ramp_carry_kw += std::abs(window[k] - window[k - 1]);
  }
  const RewardTerms terms = ComputeReward(window, row.price_per_kwh, reward_cfg);
  tr.cost_term_c1 = terms.cost_c1;
  tr.ramp_term_c2 = terms.ramp_c2;
  tr.comfort_term = ComfortViolation(next.indoor_temp_c, cfg);
  tr.reward = terms.reward - reward_cfg.comfort_weight * tr.comfort_term;
  tr.net_consumption_e = e;
  tr.realized_esu_power_c = esu.realized_power_kw;
  tr.realized_hvac_power_h = thermal.realized_hvac_power_kw;

  // The terminal observation reuses the final row; the hour features still advance.
  const std::size_t next_row = static_cast<std::size_t>(std::min(next.hour_index, horizon - 1));
  tr.next_state = Observe(next, trace[next_row], cfg, scale);
  return {std::move(next), std::move(tr)};
}

BuildingEnv::BuildingEnv(BuildingConfig cfg, RewardConfig reward_cfg, Trace trace, ObservationScale scale)
    : cfg_(cfg), reward_cfg_(reward_cfg), trace_(std::move(trace)), scale_(scale) {
  cfg_.Validate();
  reward_cfg_.Validate();
  if (trace_.empty()) throw InvalidRange("a building environment needs a non-empty trace");
  Reset();
}

void BuildingEnv::Reset() { state_ = InitialState(cfg_); }

Transition BuildingEnv::Step(const Action& action) {
  auto [next, tr] = sim::Step(state_, action, cfg_, reward_cfg_, trace_, scale_);
  state_ = std::move(next);
  return tr;
}

Eigen::VectorXd BuildingEnv::Observe() const { return sim::Observe(state_, current_row(), cfg_, scale_); }

const TraceRow& BuildingEnv::current_row() const {
  return trace_[static_cast<std::size_t>(std::min(state_.hour_index, horizon() - 1))];
}

}  // namespace metaems::sim
