#pragma once

// Comparative experiments built from ordinary training runs. Every report is
// computed from the run directories alone.

#include "igasil/config.hpp"
#include "igasil/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace igasil {

enum class StudyKind { equilibrium, sample_efficiency, scer_ablation };
std::string_view to_string(StudyKind k);
StudyKind parse_study(std::string_view s);

/// The no-imitation learner matching an environment's action space.
AgentVariant baseline_variant(std::string_view env);

struct StudyRun {
  TrainConfig cfg;
  std::filesystem::path dir;
};

std::vector<StudyRun> plan_study(StudyKind kind, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                 const std::filesystem::path& out_dir);

/// True if `dir` holds a finished run of exactly this config.
bool run_is_complete(const StudyRun& run);

/// Runs every planned campaign, `jobs` at a time. Finished runs with an
/// identical resolved config are reused when `reuse` is set.
void execute_runs(const std::vector<StudyRun>& runs, std::size_t jobs, bool reuse);

enum class Equilibrium { optimal, shadowed, none };
std::string_view to_string(Equilibrium e);

struct WindowSummary {
  double mean_return = 0.0;
  double outcome_aa = 0.0;
  double outcome_bb = 0.0;
  double outcome_cc = 0.0;
  double outcome_other = 0.0;
};

/// optimal: >= 90% (a,a) and mean >= 10; none: mean < 5; shadowed: mean >= 5
/// with (b,b) or (c,c) in at least half the episodes; otherwise none.
Equilibrium classify_equilibrium(const WindowSummary& w);

/// Last metrics row of a run directory.
WindowSummary final_window(const std::filesystem::path& run_dir);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv);
std::vector<double> read_episode_returns(const std::filesystem::path& csv);

/// Episodes needed before the trailing `window`-episode mean first reaches
/// `threshold` (counting the crossing episode); nullopt if never.
std::optional<std::size_t> episodes_to_threshold(std::span<const double> returns, std::size_t window, double threshold);

std::optional<double> median(std::vector<double> values);

struct EquilibriumEntry {
  std::string env;
  AgentVariant variant;
  std::uint64_t seed;
  WindowSummary window;
  Equilibrium equilibrium;
};

struct EfficiencyEntry {
  std::uint64_t seed;
  std::optional<std::size_t> off_policy;
  std::optional<std::size_t> on_policy;
  std::optional<double> ratio;  // +inf if only on-policy never crossed; nullopt if off-policy never crossed
};

struct AblationEntry {
  std::uint64_t seed;
  double baseline;
  double per;
  double igasil;
  bool ordering_holds;
  bool scer_max_monotone;
};

struct StudyReport {
  StudyKind kind;
  std::vector<EquilibriumEntry> equilibrium;
  std::vector<EfficiencyEntry> efficiency;
  std::optional<double> median_ratio;
  bool inconclusive = false;
  std::vector<AblationEntry> ablation;
};

/// Summarizes finished runs and writes summary.csv, summary.svg and report.txt.
StudyReport summarize_study(StudyKind kind, const std::vector<StudyRun>& runs, const std::filesystem::path& out_dir);

StudyReport run_study(StudyKind kind, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                      const std::filesystem::path& out_dir, std::size_t jobs = 1, bool reuse = true);

}  // namespace igasil
