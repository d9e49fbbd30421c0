#include "igasil/studies.hpp"

#include "igasil/plot.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace igasil {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const fs::path& file) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw std::runtime_error(file.string() + ": malformed number '" + s + "'");
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<AgentVariant> study_variants(StudyKind kind, std::string_view env) {
  switch (kind) {
    case StudyKind::equilibrium: return {AgentVariant::igasil, baseline_variant(env)};
    case StudyKind::sample_efficiency: return {AgentVariant::igasil, AgentVariant::igasil_onpolicy};
    case StudyKind::scer_ablation: return {baseline_variant(env), AgentVariant::iac_per, AgentVariant::igasil};
  }
  return {};
}

std::string opt_count(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "inf"; }

}  // namespace

std::string_view to_string(StudyKind k) {
  switch (k) {
    case StudyKind::equilibrium: return "equilibrium";
    case StudyKind::sample_efficiency: return "sample_efficiency";
    case StudyKind::scer_ablation: return "scer_ablation";
  }
  return "?";
}

StudyKind parse_study(std::string_view s) {
  for (auto k : {StudyKind::equilibrium, StudyKind::sample_efficiency, StudyKind::scer_ablation})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown study '" + std::string(s) +
                              "' (valid: equilibrium, sample_efficiency, scer_ablation)");
}

AgentVariant baseline_variant(std::string_view env) {
  return env == "rescue" ? AgentVariant::iddpg : AgentVariant::iac;
}

std::vector<StudyRun> plan_study(StudyKind kind, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                 const fs::path& out_dir) {
  std::vector<StudyRun> runs;
  for (AgentVariant v : study_variants(kind, base.env)) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.variant = v;
      cfg.seed = seed;
      validate(cfg);
      runs.push_back({cfg, out_dir / (cfg.env + "_" + std::string(to_string(v)) + "_seed" + std::to_string(seed))});
    }
  }
  return runs;
}

bool run_is_complete(const StudyRun& run) {
  if (!fs::exists(run.dir / "manifest.txt")) return false;
  return read_file(run.dir / "config.txt") == serialize(run.cfg);
}

void execute_runs(const std::vector<StudyRun>& runs, std::size_t jobs, bool reuse) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        if (reuse && run_is_complete(runs[i])) continue;
        run_campaign(runs[i].cfg, runs[i].dir);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, runs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string_view to_string(Equilibrium e) {
  switch (e) {
    case Equilibrium::optimal: return "optimal";
    case Equilibrium::shadowed: return "shadowed";
    case Equilibrium::none: return "none";
  }
  return "?";
}

Equilibrium classify_equilibrium(const WindowSummary& w) {
  if (w.outcome_aa >= 0.9 && w.mean_return >= 10.0) return Equilibrium::optimal;
  if (w.mean_return < 5.0) return Equilibrium::none;
  if (std::max(w.outcome_bb, w.outcome_cc) >= 0.5) return Equilibrium::shadowed;
  return Equilibrium::none;
}

std::vector<MetricsRow> read_metrics(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error(csv.string() + ": not a metrics file (header mismatch)");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 14) throw std::runtime_error(csv.string() + ": malformed row '" + line + "'");
    MetricsRow r;
    r.window_end_episode = static_cast<std::size_t>(to_double(c[0], csv));
    r.mean_return = to_double(c[1], csv);
    r.max_return = to_double(c[2], csv);
    r.scer_mean = to_double(c[3], csv);
    r.scer_max = to_double(c[4], csv);
    for (std::size_t k = 0; k < 3; ++k) r.touch[k] = to_double(c[5 + k], csv);
    r.outcome_aa = to_double(c[8], csv);
    r.outcome_bb = to_double(c[9], csv);
    r.outcome_cc = to_double(c[10], csv);
    r.outcome_other = to_double(c[11], csv);
    r.lambda_imit = to_double(c[12], csv);
    r.disc_loss = to_double(c[13], csv);
    rows.push_back(r);
  }
  return rows;
}

WindowSummary final_window(const fs::path& run_dir) {
  const auto rows = read_metrics(run_dir / "metrics.csv");
  if (rows.empty()) throw std::runtime_error(run_dir.string() + ": run has no metrics rows");
  const auto& r = rows.back();
  return {r.mean_return, r.outcome_aa, r.outcome_bb, r.outcome_cc, r.outcome_other};
}

std::vector<double> read_episode_returns(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != kEpisodesHeader)
    throw std::runtime_error(csv.string() + ": not an episode log (header mismatch)");
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() < 2) throw std::runtime_error(csv.string() + ": malformed row '" + line + "'");
    out.push_back(to_double(c[1], csv));
  }
  return out;
}

std::optional<std::size_t> episodes_to_threshold(std::span<const double> returns, std::size_t window,
                                                 double threshold) {
  if (window == 0 || returns.size() < window) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i];
    if (i >= window) sum -= returns[i - window];
    if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) return i + 1;
  }
  return std::nullopt;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

StudyReport summarize_study(StudyKind kind, const std::vector<StudyRun>& runs, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  StudyReport rep;
  rep.kind = kind;
  std::ostringstream csv, text;
  text << "study " << to_string(kind) << '\n';

  std::map<std::uint64_t, std::map<AgentVariant, const StudyRun*>> by_seed;
  for (const auto& r : runs) by_seed[r.cfg.seed][r.cfg.variant] = &r;

  switch (kind) {
    case StudyKind::equilibrium: {
      csv << "env,variant,seed,final_mean_return,outcome_aa,outcome_bb,outcome_cc,outcome_other,equilibrium\n";
      for (const auto& r : runs) {
        const auto w = final_window(r.dir);
        const auto e = classify_equilibrium(w);
        rep.equilibrium.push_back({r.cfg.env, r.cfg.variant, r.cfg.seed, w, e});
        csv << r.cfg.env << ',' << to_string(r.cfg.variant) << ',' << r.cfg.seed << ',' << num(w.mean_return) << ','
            << num(w.outcome_aa) << ',' << num(w.outcome_bb) << ',' << num(w.outcome_cc) << ','
            << num(w.outcome_other) << ',' << to_string(e) << '\n';
        text << to_string(r.cfg.variant) << " seed " << r.cfg.seed << ": final mean " << num(w.mean_return) << ", "
             << to_string(e) << '\n';
      }
      break;
    }
    case StudyKind::sample_efficiency: {
      text << "Sub-curriculum replay is seeded by self-generated warmup trajectories; no external demonstrations.\n";
      csv << "seed,offpolicy_episodes,onpolicy_episodes,ratio\n";
      std::vector<double> ratios;
      for (const auto& [seed, variants] : by_seed) {
        const auto off = variants.find(AgentVariant::igasil);
        const auto on = variants.find(AgentVariant::igasil_onpolicy);
        if (off == variants.end() || on == variants.end()) continue;
        const auto& cfg = off->second->cfg;
        const auto r_off = read_episode_returns(off->second->dir / "episodes.csv");
        const auto r_on = read_episode_returns(on->second->dir / "episodes.csv");
        EfficiencyEntry e{seed, episodes_to_threshold(r_off, cfg.study_threshold_window, cfg.study_threshold),
                          episodes_to_threshold(r_on, cfg.study_threshold_window, cfg.study_threshold),
                          std::nullopt};
        // On-policy never crossing counts as an infinite ratio; off-policy
        // never crossing leaves the seed without a ratio.
        std::string ratio = "na";
        if (e.off_policy) {
          e.ratio = e.on_policy ? static_cast<double>(*e.on_policy) / static_cast<double>(*e.off_policy)
                                : std::numeric_limits<double>::infinity();
          ratios.push_back(*e.ratio);
          ratio = e.on_policy ? num(*e.ratio) : "inf";
        }
        rep.efficiency.push_back(e);
        csv << seed << ',' << opt_count(e.off_policy) << ',' << opt_count(e.on_policy) << ',' << ratio << '\n';
        text << "seed " << seed << ": off-policy " << opt_count(e.off_policy) << ", on-policy "
             << opt_count(e.on_policy) << ", ratio " << ratio << '\n';
      }
      rep.median_ratio = median(ratios);
      rep.inconclusive = !rep.median_ratio;
      csv << "median,,," << (rep.median_ratio ? num(*rep.median_ratio) : "na") << '\n';
      text << "median ratio: " << (rep.median_ratio ? num(*rep.median_ratio) : "na") << '\n'
           << "reference: the original rescue-task experiment reports about 10x\n";
      if (rep.inconclusive) text << "inconclusive: the off-policy learner never reached the threshold\n";
      break;
    }
    case StudyKind::scer_ablation: {
      csv << "seed,baseline,iac_per,igasil,ordering_holds,scer_max_monotone\n";
      for (const auto& [seed, variants] : by_seed) {
        if (variants.size() != 3) continue;
        AblationEntry e{seed, 0.0, 0.0, 0.0, false, true};
        for (const auto& [variant, run] : variants) {
          const double m = final_window(run->dir).mean_return;
          if (variant == AgentVariant::igasil)
            e.igasil = m;
          else if (variant == AgentVariant::iac_per)
            e.per = m;
          else
            e.baseline = m;
          const auto rows = read_metrics(run->dir / "metrics.csv");
          for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].scer_max < rows[i - 1].scer_max) e.scer_max_monotone = false;
        }
        e.ordering_holds = e.igasil >= e.per && e.per >= e.baseline;
        rep.ablation.push_back(e);
        csv << seed << ',' << num(e.baseline) << ',' << num(e.per) << ',' << num(e.igasil) << ','
            << (e.ordering_holds ? "true" : "false") << ',' << (e.scer_max_monotone ? "true" : "false") << '\n';
        text << "seed " << seed << ": baseline " << num(e.baseline) << ", iac_per " << num(e.per) << ", igasil "
             << num(e.igasil) << ", ordering " << (e.ordering_holds ? "holds" : "violated") << '\n';
      }
      break;
    }
  }

  std::ofstream(out_dir / "summary.csv") << csv.str();
  std::ofstream(out_dir / "report.txt") << text.str();
  std::vector<fs::path> curves;
  for (const auto& r : runs) curves.push_back(r.dir / "metrics.csv");
  PlotOptions opt;
  opt.title = std::string(to_string(kind));
  if (!runs.empty()) opt.x_tick = static_cast<double>(runs.front().cfg.metrics_window);
  std::ofstream(out_dir / "summary.svg") << plot_metrics(curves, opt);
  return rep;
}

StudyReport run_study(StudyKind kind, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                      const fs::path& out_dir, std::size_t jobs, bool reuse) {
  const auto runs = plan_study(kind, base, seeds, out_dir);
  execute_runs(runs, jobs, reuse);
  return summarize_study(kind, runs, out_dir);
}

}  // namespace igasil
