#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sigrec/dtw.hpp"
#include "sigrec/signature.hpp"
#include "sigrec/trajtree.hpp"

namespace sigrec {

enum class ScoringMode { plain, dtw };
enum class Aggregation { max, incremental_mean };
enum class DtwReduction { mean, sum };

ScoringMode parse_scoring_mode(const std::string& s);
Aggregation parse_aggregation(const std::string& s);
DtwReduction parse_dtw_reduction(const std::string& s);
std::string to_string(ScoringMode m);
std::string to_string(Aggregation a);
std::string to_string(DtwReduction r);

struct EngineConfig {
  std::size_t depth = 2;
  ScoringMode mode = ScoringMode::plain;
  Aggregation aggregation = Aggregation::max;
  std::size_t dtw_radius = 1;
  DtwReduction dtw_reduction = DtwReduction::mean;
  std::vector<double> priors;           // aligned with the problem's goals; empty means uniform
  double tie_tolerance = 1e-9;          // goals this close to the maximum count as predicted
  double goal_match_tolerance = 1e-9;   // observation equal to a goal state ends the episode
  bool parallel = true;                 // score branches with the OpenMP kernel

  /// Throws std::invalid_argument if depth is outside 1..6 or the priors are
  /// not a probability vector over `goal_count` goals.
  void validate(std::size_t goal_count) const;
};

struct Goal {
  GoalId id = 0;
  std::vector<double> state;
};

struct RecognitionProblem {
  std::vector<Goal> goals;
  std::vector<double> initial_state;
  std::shared_ptr<const TrajectoryTree> tree;
  EngineConfig config;

  /// Goals and initial state taken from the tree's own records.
  static RecognitionProblem from_tree(std::shared_ptr<const TrajectoryTree> tree, EngineConfig config);
};

/// Normalized distribution over the problem's goals, in goal order.
struct GoalPosterior {
  std::vector<GoalId> goals;
  std::vector<double> probabilities;
  bool normalized = false;
  bool degenerate = false;  // every raw score was zero; uniform fallback

  /// Index of the most probable goal; ties resolve to the lowest index.
  std::size_t argmax() const;
  /// Indices whose probability is within `tolerance` of the maximum.
  std::vector<std::size_t> predicted(double tolerance) const;
  double probability_of(GoalId g) const;
};

/// Received observations, their gap-free densification and the running
/// prefix signatures. filled[t] is the state at timestep t.
class ObservationLog {
public:
  ObservationLog(std::size_t dim, std::size_t depth);

  void append_received(long t, std::span<const double> o);
  /// Pushes one densified state and its prefix signature.
  void append_filled(std::span<const double> state);

  const std::vector<std::pair<long, std::vector<double>>>& received() const noexcept { return received_; }
  const Series& filled() const noexcept { return filled_; }
  const Series& prefix_signatures() const noexcept { return prefix_; }
  const SignatureStream& stream() const noexcept { return stream_; }
  long last_t() const noexcept { return last_t_; }
  bool empty() const noexcept { return prefix_.empty(); }
  std::size_t dim() const noexcept { return stream_.dim(); }

private:
  std::vector<std::pair<long, std::vector<double>>> received_;
  Series filled_;
  Series prefix_;
  SignatureStream stream_;
  long last_t_ = -1;
};

/// 1 - exp(-1 / squared_distance), with the value 1 at distance 0.
double likelihood_from_distance(double squared_distance);

/// Plain mode: latest observation prefix signature against the branch node at
/// the same timestep (the last node whose original timestep does not exceed
/// it, so overruns clamp to the leaf).
double score_branch_plain(const ObservationLog& obs, const Branch& b);

/// DTW mode: aligns all observation prefix signatures to the branch nodes,
/// keeps the first occurrence of each observation index and reduces the
/// aligned squared distances by mean (default) or sum.
double score_branch_dtw(const ObservationLog& obs, const Branch& b, std::size_t radius,
                        DtwReduction reduction = DtwReduction::mean);

/// Per-goal reduction of branch scores: maximum, or running mean
/// P <- P + (p - P) / (n + 1).
std::map<GoalId, double> aggregate(std::span<const std::pair<GoalId, double>> scores, Aggregation mode);

/// posterior(g) = raw(g) prior(g) / sum; all-zero evidence gives a uniform
/// posterior flagged as degenerate. Goals missing from `raw` score zero.
GoalPosterior normalize(const std::map<GoalId, double>& raw, std::span<const GoalId> goals,
                        std::span<const double> priors);

/// Linear interpolation of the states strictly between from_t and to_t.
Series interpolate_missing(std::span<const double> from, long from_t, std::span<const double> to,
                           long to_t);

/// Online inference over a fixed tree. One writer per engine.
class RecognitionEngine {
public:
  explicit RecognitionEngine(RecognitionProblem problem);

  /// Accepts an observation at timestep t > last_t, filling any gap by linear
  /// interpolation. If the first observation arrives after t = 0 the initial
  /// state is used as the t = 0 anchor. An observation matching a goal state
  /// ends the episode and returns the previous posterior.
  /// Throws std::invalid_argument on a non-increasing timestep or dimension
  /// mismatch, std::logic_error once the episode has ended.
  GoalPosterior observe(long t, std::span<const double> o);

  /// Synchronized stream: the observation belongs to timestep last_t + 1.
  /// Never interpolates.
  GoalPosterior observe_next(std::span<const double> o);

  bool terminated() const noexcept { return terminated_; }
  const GoalPosterior& posterior() const noexcept { return posterior_; }
  const ObservationLog& log() const noexcept { return log_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const RecognitionProblem& problem() const noexcept { return problem_; }

  /// Scores of the most recent update, one per branch.
  const std::vector<double>& branch_scores() const noexcept { return scores_; }

private:
  bool check_goal_reached(std::span<const double> o);
  void check_dimension(std::span<const double> o) const;
  GoalPosterior update();

  RecognitionProblem problem_;
  std::vector<GoalId> goal_ids_;
  std::vector<Branch> branches_;
  ObservationLog log_;
  GoalPosterior posterior_;
  std::vector<double> scores_;
  bool terminated_ = false;
};

}  // namespace sigrec
