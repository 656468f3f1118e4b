#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace metaems::metrics {

inline constexpr int kHoursPerDay = 24;
inline constexpr int kHoursPerMonth = 720;  // fixed 30-day synthetic month

// Sum of |e_t - e_{t-1}|. Throws TooShort below two samples.
double Ramping(std::span<const double> e);

// Mean over full 720-hour months of (1 - mean/max). Months whose peak is
// <= 0 contribute 0; a trailing partial month is dropped.
double OneMinusLoadFactor(std::span<const double> e);

// Mean over full days of the daily maximum.
double AvgDailyPeak(std::span<const double> e);

double AnnualPeak(std::span<const double> e);

// Sum of max(e_t, 0).
double NetConsumptionTotal(std::span<const double> e);

// Sum of price_t * max(e_t, 0).
double ElectricityCost(std::span<const double> e, std::span<const double> price);

enum class Metric { kRamping, kOneMinusLoadFactor, kAvgDailyPeak, kAnnualPeak, kNetConsumption };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::kRamping, Metric::kOneMinusLoadFactor,
                                                   Metric::kAvgDailyPeak, Metric::kAnnualPeak,
                                                   Metric::kNetConsumption};
std::string_view MetricName(Metric m);

struct ScoreReport {
  double ramping = 0.0;
  double one_minus_load_factor = 0.0;
  double avg_daily_peak = 0.0;
  double annual_peak = 0.0;
  double net_consumption = 0.0;
  double cost = 0.0;

  double Get(Metric m) const;
  double& At(Metric m);
};

// Requires at least one month of data for the load-factor term.
ScoreReport Score(std::span<const double> e, std::span<const double> price);

// Element-wise ratio to the RBC report. Throws DegenerateBaseline when an
// RBC metric is zero.
ScoreReport Normalize(const ScoreReport& report, const ScoreReport& rbc);

// 100 * cost / cost_RBC per building, averaged. Throws LengthMismatch on
// misaligned inputs.
double AverageCostPercent(std::span<const std::vector<double>> series, std::span<const std::vector<double>> prices,
                          std::span<const std::vector<double>> rbc_series);

// Element-wise sum of several equally long series (the district profile).
std::vector<double> DistrictSum(std::span<const std::vector<double>> series);

// Per-day sums of e, one value per full day.
std::vector<double> DailyTotals(std::span<const double> e);

}  // namespace metaems::metrics
