#include "metaems/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "metaems/checkpoint.hpp"
#include "metaems/errors.hpp"
#include "metaems/seeding.hpp"

namespace metaems::harness {
namespace {

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void Emit(const RunOptions& options, const std::string& msg) {
  if (options.log) options.log(msg);
}

double Mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double SampleStd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = Mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<std::vector<meta::EpisodeRecord>> RepeatEpisode(const std::vector<meta::EpisodeRecord>& single,
                                                            int episodes) {
  std::vector<std::vector<meta::EpisodeRecord>> out;
  for (const auto& rec : single) out.emplace_back(static_cast<std::size_t>(episodes), rec);
  return out;
}

std::vector<std::vector<meta::EpisodeRecord>> FromAdaptation(std::vector<meta::AdaptationResult> results) {
  std::vector<std::vector<meta::EpisodeRecord>> out;
  for (auto& r : results) out.push_back(std::move(r.episodes));
  return out;
}

std::vector<meta::AdaptationResult> AdaptFrom(std::vector<agent::ActorCritic> inits,
                                              const std::vector<sim::BuildingSpec>& targets,
                                              const config::ExperimentConfig& cfg, std::uint64_t eval_seed) {
  std::vector<meta::AdaptationResult> out;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    Rng rng = MakeRng(eval_seed, "meta.test", {g});
    out.push_back(meta::AdaptOnline(std::move(inits[g]), targets[g], cfg.reward, cfg.test_episodes, rng));
  }
  return out;
}

std::vector<agent::ActorCritic> TrainPretrainedPool(const config::ExperimentConfig& cfg, const ZoneBuildings& zb,
                                                    std::uint64_t job_seed) {
  const int pool = cfg.pretrained.pool_size == 0 ? static_cast<int>(zb.sources.size()) : cfg.pretrained.pool_size;
  std::vector<agent::ActorCritic> models;
  for (int i = 0; i < pool; ++i) {
    Rng init = MakeRng(job_seed, "pretrained.init", {static_cast<std::uint64_t>(i)});
    Rng rng = MakeRng(job_seed, "pretrained.train", {static_cast<std::uint64_t>(i)});
    agent::ActorCritic a(sim::kObservationDim, cfg.agent, init);
    auto res = meta::AdaptOnline(std::move(a), zb.sources[static_cast<std::size_t>(i)], cfg.reward,
                                 cfg.pretrained.episodes, rng);
    models.push_back(std::move(res.final_agent));
  }
  return models;
}

metrics::ScoreReport DistrictScore(const std::vector<const meta::EpisodeRecord*>& recs) {
  std::vector<std::vector<double>> series;
  for (const auto* r : recs) series.push_back(r->net_consumption);
  const auto sum = metrics::DistrictSum(series);
  auto report = metrics::Score(sum, recs.front()->prices);
  report.cost = 0.0;
  for (const auto* r : recs) report.cost += metrics::ElectricityCost(r->net_consumption, r->prices);
  return report;
}

}  // namespace

std::string_view MethodName(Method m) {
  switch (m) {
    case Method::kNoControl: return "no_control";
    case Method::kRbc: return "rbc";
    case Method::kRandomInit: return "random_init";
    case Method::kPretrained: return "pretrained";
    case Method::kMaml: return "maml";
    case Method::kRlMpc: return "rl_mpc";
    case Method::kMetaems: return "metaems";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  for (Method m : kAllMethods) {
    if (MethodName(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::vector<Method> EnabledMethods(const config::MethodToggles& t) {
  std::vector<Method> out;
  const bool on[] = {t.no_control, t.rbc, t.random_init, t.pretrained, t.maml, t.rl_mpc, t.metaems};
  for (std::size_t i = 0; i < kAllMethods.size(); ++i) {
    if (on[i]) out.push_back(kAllMethods[i]);
  }
  return out;
}

std::array<sim::ZoneProfile, sim::kNumZones> ResolveZoneProfiles(const config::ExperimentConfig& cfg) {
  if (cfg.zone_table.empty()) return sim::DefaultZoneProfiles();
  return sim::LoadZoneProfiles(cfg.zone_table);
}

baselines::RbcRuleTable ResolveRbcTable(const config::ExperimentConfig& cfg) {
  if (cfg.rbc_table.empty()) return baselines::RbcRuleTable::Default();
  return baselines::RbcRuleTable::LoadCsv(cfg.rbc_table);
}

ZoneBuildings BuildZoneBuildings(const config::ExperimentConfig& cfg, const sim::ZoneProfile& profile, int repeat) {
  const auto z = static_cast<std::uint64_t>(profile.zone_id);
  const std::uint64_t seed = cfg.building_sampling == config::BuildingSampling::kCatalog
                                 ? DeriveSeed(cfg.master_seed, "buildings", {z})
                                 : DeriveSeed(cfg.master_seed, "buildings", {z, static_cast<std::uint64_t>(repeat)});
  ZoneBuildings zb;
  zb.zone = profile.zone_id;
  const int total = cfg.n_source_buildings + cfg.n_target_buildings;
  for (int i = 0; i < total; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    Rng cfg_rng = MakeRng(seed, "config", {idx});
    Rng trace_rng = MakeRng(seed, "trace", {idx});
    sim::BuildingSpec spec;
    spec.config = sim::SampleBuildingConfig(cfg.ranges, cfg_rng, cfg.building_defaults);
    spec.trace = sim::GenerateTrace(profile, cfg.episode_length, trace_rng, spec.config.solar_scale);
    if (i < cfg.n_source_buildings) {
      spec.id = "z" + std::to_string(profile.zone_id) + "-src" + std::to_string(i);
      zb.sources.push_back(std::move(spec));
    } else {
      spec.id = "z" + std::to_string(profile.zone_id) + "-tgt" + std::to_string(i - cfg.n_source_buildings);
      zb.targets.push_back(std::move(spec));
    }
  }
  return zb;
}

std::uint64_t JobSeed(std::uint64_t master_seed, int zone, int repeat) {
  return DeriveSeed(master_seed, "job", {static_cast<std::uint64_t>(zone), static_cast<std::uint64_t>(repeat)});
}

std::uint64_t EvaluationSeed(std::uint64_t job_seed) { return DeriveSeed(job_seed, "evaluation"); }

const MethodResult* JobResult::Find(Method m) const {
  for (const auto& r : methods) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

const ZoneMethodSummary* RunRecord::Find(int zone, Method m) const {
  for (const auto& s : summaries) {
    if (s.zone == zone && s.method == m) return &s;
  }
  return nullptr;
}

MethodResult ScoreMethod(Method method, std::vector<std::vector<meta::EpisodeRecord>> episodes,
                         const std::vector<std::vector<meta::EpisodeRecord>>& rbc,
                         const std::vector<sim::BuildingSpec>& targets) {
  if (episodes.size() != targets.size() || rbc.size() != targets.size()) {
    throw LengthMismatch("method records do not cover every target building");
  }
  MethodResult out;
  out.method = method;
  out.episodes = std::move(episodes);
  const std::size_t n_ep = out.episodes.front().size();

  std::vector<const meta::EpisodeRecord*> first;
  std::vector<const meta::EpisodeRecord*> rbc_first;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    if (out.episodes[g].size() != n_ep) throw LengthMismatch("buildings ran different episode counts");
    const auto& rec = out.episodes[g].front();
    const auto& base = rbc[g].front();
    BuildingScore s;
    s.building = targets[g].id;
    s.raw = metrics::Score(rec.net_consumption, rec.prices);
    const auto rbc_score = metrics::Score(base.net_consumption, base.prices);
    s.normalized = metrics::Normalize(s.raw, rbc_score);
    s.cost_percent = 100.0 * s.normalized.cost;
    out.buildings.push_back(std::move(s));
    first.push_back(&rec);
    rbc_first.push_back(&base);
  }
  out.district.building = "district";
  out.district.raw = DistrictScore(first);
  out.district.normalized = metrics::Normalize(out.district.raw, DistrictScore(rbc_first));
  out.district.cost_percent = 100.0 * out.district.normalized.cost;

  for (std::size_t k = 0; k < n_ep; ++k) {
    std::vector<std::vector<double>> series, prices, base;
    double reward = 0.0;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      series.push_back(out.episodes[g][k].net_consumption);
      prices.push_back(out.episodes[g][k].prices);
      base.push_back(rbc[g].front().net_consumption);
      reward += out.episodes[g][k].total_reward;
    }
    out.avg_cost_percent_per_episode.push_back(metrics::AverageCostPercent(series, prices, base));
    out.episode_rewards.push_back(reward / static_cast<double>(targets.size()));
  }
  out.avg_cost_percent = out.avg_cost_percent_per_episode.front();
  return out;
}

JobResult RunJob(const config::ExperimentConfig& cfg, const sim::ZoneProfile& profile,
                 const baselines::RbcRuleTable& rbc_table, int repeat, const std::vector<Method>& methods,
                 const RunOptions& options) {
  const auto has = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  const std::uint64_t job_seed = JobSeed(cfg.master_seed, profile.zone_id, repeat);
  const std::uint64_t eval_seed = EvaluationSeed(job_seed);
  const std::string tag = "zone " + std::to_string(profile.zone_id) + " seed " + std::to_string(repeat);

  JobResult job;
  job.zone = profile.zone_id;
  job.repeat = repeat;
  const ZoneBuildings zb = BuildZoneBuildings(cfg, profile, repeat);

  if (has(Method::kMetaems)) {
    if (!options.metaems_checkpoint_dir.empty()) {
      job.metaems_state =
          checkpoint::LoadMetaState(options.metaems_checkpoint_dir / CheckpointName("metaems", job.zone, repeat));
    } else {
      Emit(options, tag + ": meta-training");
      Rng init = MakeRng(job_seed, "metaems.init");
      auto state = meta::MetaState::Random(sim::kObservationDim, cfg.agent, cfg.meta.meta_lr_critic,
                                           cfg.meta.meta_lr_actor, init);
      job.metaems_stats = meta::MetaTrain(state, zb.sources, cfg.meta, cfg.agent, cfg.reward,
                                          DeriveSeed(job_seed, "metaems.train"),
                                          [&job](const meta::TrainLogRow& row) { job.training_log.push_back(row); });
      job.metaems_state = std::move(state);
    }
  }
  if (options.train_only) return job;

  // RBC is always evaluated: every score is normalized by it.
  std::vector<meta::EpisodeRecord> rbc_single;
  for (const auto& b : zb.targets) {
    rbc_single.push_back(baselines::RunPolicy(
        b, cfg.reward, [&rbc_table](const sim::BuildingEnv& env) { return baselines::RbcControl(env, rbc_table); }));
  }
  const auto rbc = RepeatEpisode(rbc_single, cfg.test_episodes);

  for (Method m : kAllMethods) {
    if (!has(m)) continue;
    Emit(options, tag + ": " + std::string(MethodName(m)));
    std::vector<std::vector<meta::EpisodeRecord>> episodes;
    switch (m) {
      case Method::kRbc:
        episodes = rbc;
        break;
      case Method::kNoControl: {
        std::vector<meta::EpisodeRecord> single;
        for (const auto& b : zb.targets) single.push_back(baselines::RunPolicy(b, cfg.reward, baselines::NoControlPolicy));
        episodes = RepeatEpisode(single, cfg.test_episodes);
        break;
      }
      case Method::kRandomInit: {
        std::vector<agent::ActorCritic> inits;
        for (std::size_t g = 0; g < zb.targets.size(); ++g) {
          Rng init = MakeRng(job_seed, "random_init.init", {g});
          inits.emplace_back(sim::kObservationDim, cfg.agent, init);
        }
        episodes = FromAdaptation(AdaptFrom(std::move(inits), zb.targets, cfg, eval_seed));
        break;
      }
      case Method::kPretrained: {
        const auto pool = TrainPretrainedPool(cfg, zb, job_seed);
        std::vector<agent::ActorCritic> inits;
        for (std::size_t g = 0; g < zb.targets.size(); ++g) {
          Rng pick = MakeRng(job_seed, "pretrained.pick", {g});
          inits.push_back(baselines::PretrainedInit(pool, pick));
        }
        episodes = FromAdaptation(AdaptFrom(std::move(inits), zb.targets, cfg, eval_seed));
        break;
      }
      case Method::kMaml: {
        Rng init = MakeRng(job_seed, "maml.init");
        auto state = meta::MetaState::Random(sim::kObservationDim, cfg.agent, cfg.meta.meta_lr_critic,
                                             cfg.meta.meta_lr_actor, init);
        job.maml_stats = baselines::MamlEpisodicTrain(state, zb.sources, cfg.meta, cfg.maml, cfg.agent, cfg.reward,
                                                      DeriveSeed(job_seed, "maml.train"));
        episodes = FromAdaptation(meta::MetaTest(state, zb.targets, cfg.test_episodes, cfg.agent, cfg.reward, eval_seed));
        job.maml_state = std::move(state);
        break;
      }
      case Method::kRlMpc: {
        for (std::size_t g = 0; g < zb.targets.size(); ++g) {
          Rng rng = MakeRng(job_seed, "rl_mpc", {g});
          episodes.push_back(baselines::RunRlMpc(zb.targets[g], cfg.reward, cfg.test_episodes, cfg.rl_mpc, rng));
        }
        break;
      }
      case Method::kMetaems:
        episodes = FromAdaptation(
            meta::MetaTest(*job.metaems_state, zb.targets, cfg.test_episodes, cfg.agent, cfg.reward, eval_seed));
        break;
    }
    job.methods.push_back(ScoreMethod(m, std::move(episodes), rbc, zb.targets));
  }
  return job;
}

std::vector<ZoneMethodSummary> Summarize(const config::ExperimentConfig& cfg, const std::vector<JobResult>& jobs,
                                         const std::vector<Method>& methods) {
  const auto profiles = ResolveZoneProfiles(cfg);
  std::vector<ZoneMethodSummary> out;
  for (int zone : cfg.zones) {
    for (Method m : methods) {
      ZoneMethodSummary s;
      s.zone = zone;
      s.zone_name = profiles[static_cast<std::size_t>(zone - 1)].name;
      s.method = m;
      std::vector<double> costs;
      std::size_t building_count = 0;
      std::vector<std::vector<double>> daily;
      for (const auto& job : jobs) {
        if (job.zone != zone) continue;
        const MethodResult* r = job.Find(m);
        if (!r) continue;
        ++s.seeds;
        costs.push_back(r->avg_cost_percent);
        for (const auto& b : r->buildings) {
          for (metrics::Metric k : metrics::kAllMetrics) s.normalized.At(k) += b.normalized.Get(k);
          s.normalized.cost += b.normalized.cost;
          ++building_count;
        }
        for (metrics::Metric k : metrics::kAllMetrics) s.district_normalized.At(k) += r->district.normalized.Get(k);
        s.district_normalized.cost += r->district.normalized.cost;
        if (s.episode_rewards.empty()) s.episode_rewards.assign(r->episode_rewards.size(), 0.0);
        for (std::size_t k = 0; k < r->episode_rewards.size(); ++k) s.episode_rewards[k] += r->episode_rewards[k];
        std::vector<std::vector<double>> series;
        for (const auto& b : r->episodes) series.push_back(b.front().net_consumption);
        daily.push_back(metrics::DailyTotals(metrics::DistrictSum(series)));
      }
      if (s.seeds == 0) continue;
      s.avg_cost_mean = Mean(costs);
      s.avg_cost_std = SampleStd(costs);
      for (metrics::Metric k : metrics::kAllMetrics) {
        s.normalized.At(k) /= static_cast<double>(building_count);
        s.district_normalized.At(k) /= s.seeds;
      }
      s.normalized.cost /= static_cast<double>(building_count);
      s.district_normalized.cost /= s.seeds;
      double running = 0.0;
      for (std::size_t k = 0; k < s.episode_rewards.size(); ++k) {
        s.episode_rewards[k] /= s.seeds;
        running += s.episode_rewards[k];
        s.accumulated_rewards.push_back(running / static_cast<double>(k + 1));
      }
      s.daily_consumption.assign(daily.front().size(), 0.0);
      for (const auto& d : daily) {
        for (std::size_t i = 0; i < d.size(); ++i) s.daily_consumption[i] += d[i] / s.seeds;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string ConfigHash(const config::ExperimentConfig& cfg) {
  auto copy = cfg;
  copy.output_dir.clear();
  const std::string text = config::ToIni(copy);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string CheckpointName(std::string_view method, int zone, int repeat) {
  return std::string(method) + "_zone" + std::to_string(zone) + "_seed" + std::to_string(repeat) + ".ckpt";
}

RunRecord RunExperiment(const config::ExperimentConfig& cfg, const RunOptions& options) {
  cfg.Validate();
  const auto start = std::chrono::steady_clock::now();
  const auto profiles = ResolveZoneProfiles(cfg);
  const auto rbc_table = ResolveRbcTable(cfg);

  RunRecord record;
  record.config_hash = ConfigHash(cfg);
  record.methods = options.methods ? *options.methods : EnabledMethods(cfg.methods);

  struct Task {
    int zone;
    int repeat;
  };
  std::vector<Task> tasks;
  for (int zone : cfg.zones) {
    for (int r = 0; r < cfg.n_repeat_seeds; ++r) tasks.push_back({zone, r});
  }
  record.jobs.resize(tasks.size());

  std::mutex log_mutex;
  RunOptions job_options = options;
  if (options.log) {
    job_options.log = [&](const std::string& msg) {
      std::lock_guard lock(log_mutex);
      options.log(msg);
    };
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const auto& t = tasks[i];
        record.jobs[i] = RunJob(cfg, profiles[static_cast<std::size_t>(t.zone - 1)], rbc_table, t.repeat,
                                record.methods, job_options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(options.jobs, 1, static_cast<int>(tasks.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (!options.train_only) record.summaries = Summarize(cfg, record.jobs, record.methods);
  record.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::optional<double> ImprovementOverBest(double candidate, const std::vector<double>& baselines) {
  if (baselines.empty()) return std::nullopt;
  const double best = *std::min_element(baselines.begin(), baselines.end());
  if (!(candidate < best)) return std::nullopt;
  return 100.0 * (best - candidate) / best;
}

void WriteSummaryCsv(const std::filesystem::path& path, const RunRecord& record) {
  auto out = OpenOut(path);
  out << "zone,zone_name,method,seeds,avg_cost_percent_mean,avg_cost_percent_std";
  for (metrics::Metric k : metrics::kAllMetrics) out << ',' << metrics::MetricName(k);
  out << '\n';
  for (const auto& s : record.summaries) {
    out << s.zone << ',' << s.zone_name << ',' << MethodName(s.method) << ',' << s.seeds << ','
        << Fixed(s.avg_cost_mean, 4) << ',' << Fixed(s.avg_cost_std, 4);
    for (metrics::Metric k : metrics::kAllMetrics) out << ',' << Fixed(s.normalized.Get(k), 6);
    out << '\n';
  }
}

void WriteBreakdownCsv(const std::filesystem::path& path, const RunRecord& record) {
  // Mean over zones of the per-zone building-averaged normalized metrics.
  std::vector<std::pair<Method, metrics::ScoreReport>> rows;
  for (Method m : record.methods) {
    metrics::ScoreReport acc;
    int zones = 0;
    for (const auto& s : record.summaries) {
      if (s.method != m) continue;
      for (metrics::Metric k : metrics::kAllMetrics) acc.At(k) += s.normalized.Get(k);
      ++zones;
    }
    if (zones == 0) continue;
    for (metrics::Metric k : metrics::kAllMetrics) acc.At(k) /= zones;
    rows.emplace_back(m, acc);
  }
  const auto average = [](const metrics::ScoreReport& r) {
    double sum = 0.0;
    for (metrics::Metric k : metrics::kAllMetrics) sum += r.Get(k);
    return sum / static_cast<double>(metrics::kAllMetrics.size());
  };

  auto out = OpenOut(path);
  out << "method";
  for (metrics::Metric k : metrics::kAllMetrics) out << ',' << metrics::MetricName(k);
  out << ",average\n";
  const metrics::ScoreReport* candidate = nullptr;
  std::vector<const metrics::ScoreReport*> learned;
  for (const auto& [m, r] : rows) {
    out << MethodName(m);
    for (metrics::Metric k : metrics::kAllMetrics) out << ',' << Fixed(r.Get(k), 6);
    out << ',' << Fixed(average(r), 6) << '\n';
    if (m == Method::kMetaems) {
      candidate = &r;
    } else if (m != Method::kRbc && m != Method::kNoControl) {
      learned.push_back(&r);
    }
  }
  if (!candidate || learned.empty()) return;
  // Improvement over the best learned baseline, or "-" when not the best.
  out << "improvement_percent";
  const auto cell = [&](auto get) {
    std::vector<double> base;
    for (const auto* r : learned) base.push_back(get(*r));
    const auto imp = ImprovementOverBest(get(*candidate), base);
    out << ',' << (imp ? Fixed(*imp, 2) : std::string("-"));
  };
  for (metrics::Metric k : metrics::kAllMetrics) cell([k](const metrics::ScoreReport& r) { return r.Get(k); });
  cell(average);
  out << '\n';
}

void WriteBuildingsCsv(const std::filesystem::path& path, const RunRecord& record) {
  auto out = OpenOut(path);
  out << "zone,seed,method,building";
  for (metrics::Metric k : metrics::kAllMetrics) out << ',' << metrics::MetricName(k);
  out << ",cost";
  for (metrics::Metric k : metrics::kAllMetrics) out << ",norm_" << metrics::MetricName(k);
  out << ",cost_percent\n";
  for (const auto& job : record.jobs) {
    for (const auto& m : job.methods) {
      std::vector<const BuildingScore*> rows;
      for (const auto& b : m.buildings) rows.push_back(&b);
      rows.push_back(&m.district);
      for (const auto* b : rows) {
        out << job.zone << ',' << job.repeat << ',' << MethodName(m.method) << ',' << b->building;
        for (metrics::Metric k : metrics::kAllMetrics) out << ',' << Fixed(b->raw.Get(k), 6);
        out << ',' << Fixed(b->raw.cost, 6);
        for (metrics::Metric k : metrics::kAllMetrics) out << ',' << Fixed(b->normalized.Get(k), 6);
        out << ',' << Fixed(b->cost_percent, 4) << '\n';
      }
    }
  }
}

void WriteTrainingLogCsv(const std::filesystem::path& path, const RunRecord& record) {
  auto out = OpenOut(path);
  out << "zone,seed,round,interval,slot,building,critic_loss,actor_loss,critic_grad_norm,actor_grad_norm\n";
  for (const auto& job : record.jobs) {
    for (const auto& row : job.training_log) {
      for (std::size_t i = 0; i < row.buildings.size(); ++i) {
        out << job.zone << ',' << job.repeat << ',' << row.round << ',' << row.interval << ',' << i << ','
            << row.buildings[i] << ',' << config::FormatDouble(row.critic_losses[i]) << ','
            << config::FormatDouble(row.actor_losses[i]) << ',' << config::FormatDouble(row.critic_grad_norm) << ','
            << config::FormatDouble(row.actor_grad_norm) << '\n';
      }
    }
  }
}

void WriteCheckpoints(const std::filesystem::path& dir, const RunRecord& record) {
  std::filesystem::create_directories(dir);
  for (const auto& job : record.jobs) {
    if (job.metaems_state) checkpoint::Save(dir / CheckpointName("metaems", job.zone, job.repeat), *job.metaems_state);
    if (job.maml_state) checkpoint::Save(dir / CheckpointName("maml", job.zone, job.repeat), *job.maml_state);
  }
}

void EmitLearningCurves(const std::filesystem::path& path, const RunRecord& record) {
  auto out = OpenOut(path);
  out << "zone,series,index";
  for (Method m : record.methods) out << ',' << MethodName(m);
  out << '\n';
  std::vector<int> zones;
  for (const auto& s : record.summaries) {
    if (std::find(zones.begin(), zones.end(), s.zone) == zones.end()) zones.push_back(s.zone);
  }
  for (int zone : zones) {
    std::vector<const ZoneMethodSummary*> cols;
    for (Method m : record.methods) cols.push_back(record.Find(zone, m));
    const auto write_series = [&](const char* name, auto field) {
      std::size_t len = 0;
      for (const auto* c : cols) {
        if (c) len = std::max(len, (c->*field).size());
      }
      for (std::size_t i = 0; i < len; ++i) {
        out << zone << ',' << name << ',' << (i + 1);
        for (const auto* c : cols) {
          out << ',';
          if (c && i < (c->*field).size()) out << Fixed((c->*field)[i], 6);
        }
        out << '\n';
      }
    };
    write_series("accumulated_reward", &ZoneMethodSummary::accumulated_rewards);
    write_series("daily_consumption", &ZoneMethodSummary::daily_consumption);
  }
}

std::string FormatRunSummary(const RunRecord& record, const config::ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "run: " << cfg.name << "\n";
  out << "version: " << record.artifact_version << "\n";
  out << "config_hash: " << record.config_hash << "\n";
  out << "master_seed: " << cfg.master_seed << "\n";
  out << "repeats: " << cfg.n_repeat_seeds << "\n";
  out << "episode_length: " << cfg.episode_length << "\n";
  out << "test_episodes: " << cfg.test_episodes << "\n";
  out << "wall_clock_s: " << Fixed(record.wall_clock_seconds, 1) << "\n\n";
  if (record.summaries.empty()) return out.str();

  out << "average cost, % of RBC (mean +- std over repeats, first test episode)\n";
  std::vector<int> zones;
  for (const auto& s : record.summaries) {
    if (std::find(zones.begin(), zones.end(), s.zone) == zones.end()) zones.push_back(s.zone);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s", "method");
  out << buf;
  for (int z : zones) {
    std::snprintf(buf, sizeof(buf), " | %-17s", ("zone " + std::to_string(z)).c_str());
    out << buf;
  }
  out << "\n";
  for (Method m : record.methods) {
    std::snprintf(buf, sizeof(buf), "%-12s", std::string(MethodName(m)).c_str());
    out << buf;
    for (int z : zones) {
      const auto* s = record.Find(z, m);
      if (s) {
        std::snprintf(buf, sizeof(buf), " | %7.2f +- %6.2f", s->avg_cost_mean, s->avg_cost_std);
      } else {
        std::snprintf(buf, sizeof(buf), " | %17s", "-");
      }
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

void WriteRunOutputs(const std::filesystem::path& dir, const RunRecord& record, const config::ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    auto out = OpenOut(dir / "resolved.cfg");
    out << config::ToIni(cfg);
  }
  if (!record.summaries.empty()) {
    WriteSummaryCsv(dir / "summary.csv", record);
    WriteBreakdownCsv(dir / "breakdown.csv", record);
    WriteBuildingsCsv(dir / "buildings.csv", record);
    EmitLearningCurves(dir / "curves.csv", record);
  }
  WriteTrainingLogCsv(dir / "training_log.csv", record);
  WriteCheckpoints(dir / "checkpoints", record);
  auto out = OpenOut(dir / "run_summary.txt");
  out << FormatRunSummary(record, cfg);
}

}  // namespace metaems::harness
