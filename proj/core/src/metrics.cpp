#include "metaems/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metaems/errors.hpp"

namespace metaems::metrics {

double Ramping(std::span<const double> e) {
  if (e.size() < 2) throw TooShort("ramping needs at least two samples");
  double total = 0.0;
  for (std::size_t t = 1; t < e.size(); ++t) total += std::abs(e[t] - e[t - 1]);
  return total;
}

double OneMinusLoadFactor(std::span<const double> e) {
  const std::size_t months = e.size() / kHoursPerMonth;
  if (months == 0) throw TooShort("load factor needs at least one 720-hour month");
  double total = 0.0;
  for (std::size_t m = 0; m < months; ++m) {
    const auto month = e.subspan(m * kHoursPerMonth, kHoursPerMonth);
    const double peak = *std::max_element(month.begin(), month.end());
    if (peak <= 0.0) continue;
    double sum = 0.0;
    for (double v : month) sum += v;
    total += 1.0 - (sum / kHoursPerMonth) / peak;
  }
  return total / static_cast<double>(months);
}

double AvgDailyPeak(std::span<const double> e) {
  const std::size_t days = e.size() / kHoursPerDay;
  if (days == 0) throw TooShort("daily peak needs at least 24 hours");
  double total = 0.0;
  for (std::size_t d = 0; d < days; ++d) {
    const auto day = e.subspan(d * kHoursPerDay, kHoursPerDay);
    total += *std::max_element(day.begin(), day.end());
  }
  return total / static_cast<double>(days);
}

double AnnualPeak(std::span<const double> e) {
  if (e.empty()) throw EmptySeries("peak of an empty series");
  return *std::max_element(e.begin(), e.end());
}

double NetConsumptionTotal(std::span<const double> e) {
  if (e.empty()) throw EmptySeries("net consumption of an empty series");
  double total = 0.0;
  for (double v : e) total += std::max(v, 0.0);
  return total;
}

double ElectricityCost(std::span<const double> e, std::span<const double> price) {
  if (e.size() != price.size()) {
    throw LengthMismatch("consumption has " + std::to_string(e.size()) + " samples, prices " +
                         std::to_string(price.size()));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) total += price[t] * std::max(e[t], 0.0);
  return total;
}

std::string_view MetricName(Metric m) {
  switch (m) {
    case Metric::kRamping: return "ramping";
    case Metric::kOneMinusLoadFactor: return "one_minus_load_factor";
    case Metric::kAvgDailyPeak: return "avg_daily_peak";
    case Metric::kAnnualPeak: return "annual_peak";
    case Metric::kNetConsumption: return "net_consumption";
  }
  return "unknown";
}

double ScoreReport::Get(Metric m) const { return const_cast<ScoreReport*>(this)->At(m); }

double& ScoreReport::At(Metric m) {
  switch (m) {
    case Metric::kRamping: return ramping;
    case Metric::kOneMinusLoadFactor: return one_minus_load_factor;
    case Metric::kAvgDailyPeak: return avg_daily_peak;
    case Metric::kAnnualPeak: return annual_peak;
    case Metric::kNetConsumption: return net_consumption;
  }
  return ramping;
}

ScoreReport Score(std::span<const double> e, std::span<const double> price) {
  ScoreReport r;
  r.ramping = Ramping(e);
  r.one_minus_load_factor = OneMinusLoadFactor(e);
  r.avg_daily_peak = AvgDailyPeak(e);
  r.annual_peak = AnnualPeak(e);
  r.net_consumption = NetConsumptionTotal(e);
  r.cost = ElectricityCost(e, price);
  return r;
}

ScoreReport Normalize(const ScoreReport& report, const ScoreReport& rbc) {
  ScoreReport out;
  for (Metric m : kAllMetrics) {
    const double base = rbc.Get(m);
    if (base == 0.0) throw DegenerateBaseline("RBC " + std::string(MetricName(m)) + " is zero");
    out.At(m) = report.Get(m) / base;
  }
  if (rbc.cost == 0.0) throw DegenerateBaseline("RBC cost is zero");
  out.cost = report.cost / rbc.cost;
  return out;
}

double AverageCostPercent(std::span<const std::vector<double>> series, std::span<const std::vector<double>> prices,
                          std::span<const std::vector<double>> rbc_series) {
  if (series.size() != prices.size() || series.size() != rbc_series.size()) {
    throw LengthMismatch("building counts differ between controller, prices and RBC");
  }
  if (series.empty()) throw EmptySeries("average cost over zero buildings");
  double total = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double rbc_cost = ElectricityCost(rbc_series[i], prices[i]);
    if (rbc_cost == 0.0) throw DegenerateBaseline("RBC cost is zero for building " + std::to_string(i));
    total += 100.0 * ElectricityCost(series[i], prices[i]) / rbc_cost;
  }
  return total / static_cast<double>(series.size());
}

std::vector<double> DistrictSum(std::span<const std::vector<double>> series) {
  if (series.empty()) return {};
  std::vector<double> out(series.front().size(), 0.0);
  for (const auto& s : series) {
    if (s.size() != out.size()) throw LengthMismatch("district members have different lengths");
    for (std::size_t t = 0; t < s.size(); ++t) out[t] += s[t];
  }
  return out;
}

std::vector<double> DailyTotals(std::span<const double> e) {
  std::vector<double> out;
  for (std::size_t d = 0; d + kHoursPerDay <= e.size(); d += kHoursPerDay) {
    double sum = 0.0;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) sum += e[d + h];
    out.push_back(sum);
  }
  return out;
}

}  // namespace metaems::metrics
