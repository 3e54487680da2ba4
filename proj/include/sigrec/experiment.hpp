#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigrec/recognizer.hpp"
#include "sigrec/sampler.hpp"

namespace sigrec {

/// One recognition problem on a grid map. Goal i of `goals` gets GoalId i.
struct ProblemSpec {
  std::string name;
  GridMap map;
  Cell start;
  std::vector<Cell> goals;
  std::size_t true_goal = 0;
  /// Observed agent trajectory; sampled from a separate seed when absent.
  std::optional<Trajectory> observations;
};

struct ExperimentSpec {
  std::vector<ProblemSpec> problems;
  std::vector<double> fractions{1.0 / 7, 2.0 / 7, 3.0 / 7, 4.0 / 7, 5.0 / 7, 6.0 / 7};
  std::vector<double> merge_thresholds{0.2};
  std::vector<double> prune_thresholds{0.2};
  std::vector<std::size_t> k_values{5};
  std::vector<ScoringMode> modes{ScoringMode::plain};
  EngineConfig engine;            // depth, aggregation, radius, tolerances
  std::uint64_t seed = 1;
  double spread = 0.5;
  double step = 1.0;
  bool parallel = true;           // problems run on an OpenMP worker pool

  /// Throws std::invalid_argument on empty grids or fractions outside (0, 1].
  void validate() const;
};

/// Reads an experiment description (JSON, see docs/FORMATS.md). Map and
/// observation paths are resolved relative to `base_dir`.
ExperimentSpec load_experiment(const std::string& path);

// ---------------------------------------------------------------------------
// Outcomes and metrics

struct FractionOutcome {
  double fraction = 0.0;
  std::vector<std::size_t> step_argmax;      // one prediction per observation step up to the cut
  std::vector<std::size_t> final_predicted;  // goals tied at the maximum after the cut
  std::size_t final_argmax = 0;
};

struct ProblemOutcome {
  std::string name;
  std::size_t true_goal = 0;
  std::size_t goal_count = 0;
  std::size_t planner_calls = 0;
  double online_seconds = 0.0;
  double offline_seconds = 0.0;
  bool threshold_violation = false;
  std::vector<FractionOutcome> fractions;
};

struct FractionMetrics {
  double fraction = 0.0;
  double ppv = 0.0;        // percent
  double acc = 0.0;        // percent
  double spr = 0.0;
  double ppv_half_width = 0.0;
  double acc_half_width = 0.0;

  friend bool operator==(const FractionMetrics&, const FractionMetrics&) = default;
};

struct MetricsReport {
  std::string label;
  std::size_t problems = 0;
  double ppv = 0.0;        // percent, TP / (TP + FP) over every prediction step
  double acc = 0.0;        // percent of (problem, fraction) cuts with argmax == truth
  double spr = 0.0;        // mean size of the tied-at-maximum set
  double pc = 0.0;         // mean sampler invocations per problem
  double online_mean = 0.0, online_std = 0.0;
  double offline_mean = 0.0, offline_std = 0.0;
  double ppv_half_width = 0.0;  // 95% normal approximation over problems
  double acc_half_width = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t threshold_violations = 0;
  std::vector<FractionMetrics> per_fraction;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport compute_metrics(std::span<const ProblemOutcome> outcomes);

// ---------------------------------------------------------------------------
// Runs

struct RunSettings {
  double merge = 0.0;
  double prune = 0.0;
  std::size_t k = 1;
  ScoringMode mode = ScoringMode::plain;
};

/// Samples K trajectories per goal (one sampler call per goal), builds and
/// compresses the tree, then streams the observations and records
/// predictions at every fraction cut.
ProblemOutcome run_problem(const ProblemSpec& problem, const ExperimentSpec& spec, const RunSettings& run);

/// Same, with trajectories supplied by the caller (used when a grid search
/// reuses one sample per K). `planner_calls` is reported as given.
ProblemOutcome run_problem_with(const ProblemSpec& problem, const ExperimentSpec& spec, const RunSettings& run,
                                std::span<const LabeledTrajectory> sampled, double sampling_seconds,
                                std::size_t planner_calls);

/// First element of every grid list.
MetricsReport run_experiment(const ExperimentSpec& spec);
MetricsReport run_experiment(const ExperimentSpec& spec, const RunSettings& run);

struct GridCell {
  RunSettings settings;
  double mean_ppv = 0.0;
  double mean_acc = 0.0;
  std::size_t threshold_violations = 0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;  // ties: smaller prune, then smaller merge, then smaller K
};

/// Exhaustive merge x prune x K sweep for the first mode in the spec.
/// Sampling happens once per (problem, K).
GridSearchResult grid_search(const ExperimentSpec& spec);
void write_grid_csv(std::ostream& os, const GridSearchResult& result);

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { csv, json_lines, text_table };
ReportFormat parse_report_format(const std::string& s);

/// CSV columns: label,problems,ppv,acc,spr,pc,online_mean,online_std,
/// offline_mean,offline_std,ppv_hw,acc_hw,tp,fp,violations
void emit_report(std::ostream& os, const MetricsReport& report, ReportFormat format);
void emit_report(const std::string& path, const MetricsReport& report, ReportFormat format);
MetricsReport report_from_json(const std::string& line);

}  // namespace sigrec
