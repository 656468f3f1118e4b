#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "metaems/errors.hpp"
#include "metaems/simulator.hpp"

namespace metaems::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Day of year with the coldest weather and the day with the most sun.
constexpr double kColdestDay = 15.0;
constexpr double kSunniestDay = 172.0;

}  // namespace

ZoneProfile DefaultZoneProfile(int zone_id) {
  ZoneProfile z;
  z.zone_id = zone_id;
  switch (zone_id) {
    case 1:
      z.name = "Hot-Humid";
      z.temp_mean_c = 21.0;
      z.temp_annual_amplitude_c = 7.0;
      z.temp_daily_amplitude_c = 4.5;
      z.load_base_kw = 25.0;
      z.load_morning_peak_kw = 10.0;
      z.load_evening_peak_kw = 18.0;
      z.solar_peak_kw = 30.0;
      z.price_offpeak = 0.20;
      z.price_peak = 0.45;
      break;
    case 2:
      z.name = "Warm-Humid";
      z.temp_mean_c = 17.0;
      z.temp_annual_amplitude_c = 9.0;
      z.temp_daily_amplitude_c = 5.0;
      z.load_base_kw = 22.0;
      z.load_morning_peak_kw = 12.0;
      z.load_evening_peak_kw = 16.0;
      z.solar_peak_kw = 28.0;
      z.price_offpeak = 0.18;
      z.price_peak = 0.42;
      break;
    case 3:
      z.name = "Mixed-Humid";
      z.temp_mean_c = 15.0;
      z.temp_annual_amplitude_c = 11.0;
      z.temp_daily_amplitude_c = 5.0;
      z.load_base_kw = 24.0;
      z.load_morning_peak_kw = 12.0;
      z.load_evening_peak_kw = 18.0;
      z.solar_peak_kw = 26.0;
      z.price_offpeak = 0.19;
      z.price_peak = 0.44;
      break;
    case 4:
      z.name = "Cold-Humid";
      z.temp_mean_c = 10.0;
      z.temp_annual_amplitude_c = 14.0;
      z.temp_daily_amplitude_c = 5.5;
      z.load_base_kw = 26.0;
      z.load_morning_peak_kw = 14.0;
      z.load_evening_peak_kw = 20.0;
      z.solar_peak_kw = 22.0;
      z.price_offpeak = 0.21;
      z.price_peak = 0.48;
      break;
    default:
      throw ConfigError("zone id must be in 1.." + std::to_string(kNumZones) + ", got " + std::to_string(zone_id));
  }
  return z;
}

std::array<ZoneProfile, kNumZones> DefaultZoneProfiles() {
  return {DefaultZoneProfile(1), DefaultZoneProfile(2), DefaultZoneProfile(3), DefaultZoneProfile(4)};
}

std::array<ZoneProfile, kNumZones> LoadZoneProfiles(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw IoError("cannot read zone table " + path.string() + ": " + e.message());
  }
  const int version = tree.get<int>("table.version", -1);
  if (version != kZoneTableVersion) {
    throw ConfigError("zone table " + path.string() + " has version " + std::to_string(version) + ", expected " +
                      std::to_string(kZoneTableVersion));
  }
  std::array<ZoneProfile, kNumZones> zones;
  for (int id = 1; id <= kNumZones; ++id) {
    const std::string section = "zone" + std::to_string(id);
    const auto node = tree.get_child_optional(section);
    if (!node) throw ConfigError("zone table lacks section [" + section + "]");
    try {
      ZoneProfile z;
      z.zone_id = id;
      z.name = node->get<std::string>("name");
      z.temp_mean_c = node->get<double>("temp_mean_c");
      z.temp_annual_amplitude_c = node->get<double>("temp_annual_amplitude_c");
      z.temp_daily_amplitude_c = node->get<double>("temp_daily_amplitude_c");
      z.temp_noise_c = node->get<double>("temp_noise_c");
      z.load_base_kw = node->get<double>("load_base_kw");
      z.load_morning_peak_kw = node->get<double>("load_morning_peak_kw");
      z.load_evening_peak_kw = node->get<double>("load_evening_peak_kw");
      z.load_noise_fraction = node->get<double>("load_noise_fraction");
      z.solar_peak_kw = node->get<double>("solar_peak_kw");
      z.price_offpeak = node->get<double>("price_offpeak");
      z.price_peak = node->get<double>("price_peak");
      z.peak_start_hour = node->get<int>("peak_start_hour");
      z.peak_end_hour = node->get<int>("peak_end_hour");
      zones[static_cast<std::size_t>(id - 1)] = z;
    } catch (const boost::property_tree::ptree_error& e) {
      throw ConfigError("zone table section [" + section + "]: " + e.what());
    }
  }
  return zones;
}

Trace GenerateTrace(const ZoneProfile& zone, int length, Rng& rng, double solar_scale) {
  if (length < 1) throw InvalidRange("trace length must be >= 1");
  Trace trace;
  trace.reserve(static_cast<std::size_t>(length));
  double temp_anomaly = 0.0;
  double cloud = 1.0;
  for (int t = 0; t < length; ++t) {
    const int hod = t % 24;
    const double day = static_cast<double>(t / 24);
    if (hod == 0) cloud = UniformIn(rng, 0.6, 1.0);

    // AR(1) weather anomaly on top of the seasonal and diurnal cycles.
    temp_anomaly = 0.9 * temp_anomaly + zone.temp_noise_c * std::sqrt(1.0 - 0.81) * StandardNormal(rng);
    const double seasonal_temp = -zone.temp_annual_amplitude_c * std::cos(kTwoPi * (day - kColdestDay) / 365.0);
    const double diurnal_temp = zone.temp_daily_amplitude_c * std::cos(kTwoPi * (hod - 15.0) / 24.0);

    const double sun = std::max(0.0, std::sin(std::numbers::pi * (hod - 6.0) / 12.0));
    const double season_sun = 0.75 + 0.25 * std::cos(kTwoPi * (day - kSunniestDay) / 365.0);

    const double morning = std::exp(-0.5 * std::pow((hod - 8.0) / 1.5, 2.0));
    const double evening = std::exp(-0.5 * std::pow((hod - 19.0) / 2.0, 2.0));
    const double load_mean =
        zone.load_base_kw + zone.load_morning_peak_kw * morning + zone.load_evening_peak_kw * evening;
    const double load = std::max(0.0, load_mean * (1.0 + zone.load_noise_fraction * StandardNormal(rng)));

    const bool peak = hod >= zone.peak_start_hour && hod < zone.peak_end_hour;

    TraceRow row;
    row.hour_index = t;
    row.renewable_output_kw = zone.solar_peak_kw * solar_scale * season_sun * cloud * sun;
    row.nonshiftable_load_kw = load;
    row.outdoor_temp_c = zone.temp_mean_c + seasonal_temp + diurnal_temp + temp_anomaly;
    row.price_per_kwh = peak ? zone.price_peak : zone.price_offpeak;
    trace.push_back(row);
  }
  return trace;
}

void WriteTraceCsv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kTraceCsvHeader << '\n';
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.hour_index, r.renewable_output_kw,
                  r.nonshiftable_load_kw, r.outdoor_temp_c, r.price_per_kwh);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Trace ReadTraceCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("trace file " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader) {
    throw IoError("trace file " + path.string() + " has header '" + line + "', expected '" + kTraceCsvHeader + "'");
  }
  Trace trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TraceRow r;
    char tail = 0;
    const int n = std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf%c", &r.hour_index, &r.renewable_output_kw,
                              &r.nonshiftable_load_kw, &r.outdoor_temp_c, &r.price_per_kwh, &tail);
    if (n != 5 && !(n == 6 && tail == '\r')) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed trace row");
    }
    if (r.hour_index != static_cast<int>(trace.size())) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": hour index out of sequence");
    }
    trace.push_back(r);
  }
  return trace;
}

}  // namespace metaems::sim
