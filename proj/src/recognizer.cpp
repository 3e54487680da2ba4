#include "sigrec/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sigrec/kernels.hpp"

namespace sigrec {

// ---------------------------------------------------------------------------
// Config

ScoringMode parse_scoring_mode(const std::string& s) {
  if (s == "plain") return ScoringMode::plain;
  if (s == "dtw") return ScoringMode::dtw;
  throw std::invalid_argument("unknown scoring mode '" + s + "' (expected plain or dtw)");
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "mean" || s == "incremental_mean") return Aggregation::incremental_mean;
  throw std::invalid_argument("unknown aggregation '" + s + "' (expected max or mean)");
}

DtwReduction parse_dtw_reduction(const std::string& s) {
  if (s == "mean") return DtwReduction::mean;
  if (s == "sum") return DtwReduction::sum;
  throw std::invalid_argument("unknown DTW reduction '" + s + "' (expected mean or sum)");
}

std::string to_string(ScoringMode m) { return m == ScoringMode::plain ? "plain" : "dtw"; }
std::string to_string(Aggregation a) { return a == Aggregation::max ? "max" : "mean"; }
std::string to_string(DtwReduction r) { return r == DtwReduction::mean ? "mean" : "sum"; }

void EngineConfig::validate(std::size_t goal_count) const {
  if (depth < 1 || depth > 6) throw std::invalid_argument("signature depth must be in 1..6");
  if (tie_tolerance < 0.0) throw std::invalid_argument("tie tolerance must be nonnegative");
  if (priors.empty()) return;
  if (priors.size() != goal_count)
    throw std::invalid_argument("prior table has " + std::to_string(priors.size()) + " entries for " +
                                std::to_string(goal_count) + " goals");
  double sum = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) throw std::invalid_argument("priors must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("priors must sum to 1");
}

RecognitionProblem RecognitionProblem::from_tree(std::shared_ptr<const TrajectoryTree> tree,
                                                 EngineConfig config) {
  if (!tree) throw std::invalid_argument("from_tree: null tree");
  RecognitionProblem p;
  for (GoalId g : tree->goal_ids()) {
    auto it = tree->goal_states().find(g);
    p.goals.push_back({g, it == tree->goal_states().end() ? std::vector<double>{} : it->second});
  }
  p.initial_state = tree->initial_state();
  p.tree = std::move(tree);
  p.config = std::move(config);
  return p;
}

// ---------------------------------------------------------------------------
// Posterior

std::size_t GoalPosterior::argmax() const {
  if (probabilities.empty()) throw std::logic_error("argmax of an empty posterior");
  return static_cast<std::size_t>(
      std::distance(probabilities.begin(), std::max_element(probabilities.begin(), probabilities.end())));
}

std::vector<std::size_t> GoalPosterior::predicted(double tolerance) const {
  std::vector<std::size_t> out;
  if (probabilities.empty()) return out;
  const double best = probabilities[argmax()];
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    if (probabilities[i] >= best - tolerance) out.push_back(i);
  return out;
}

double GoalPosterior::probability_of(GoalId g) const {
  for (std::size_t i = 0; i < goals.size(); ++i)
    if (goals[i] == g) return probabilities[i];
  throw std::out_of_range("goal " + std::to_string(g) + " is not part of the posterior");
}

// ---------------------------------------------------------------------------
// ObservationLog

ObservationLog::ObservationLog(std::size_t dim, std::size_t depth) : stream_(dim, depth) {}

void ObservationLog::append_received(long t, std::span<const double> o) {
  received_.emplace_back(t, std::vector<double>(o.begin(), o.end()));
  last_t_ = t;
}

void ObservationLog::append_filled(std::span<const double> state) {
  stream_.extend(state);
  filled_.emplace_back(state.begin(), state.end());
  prefix_.push_back(stream_.signature().values());
}

// ---------------------------------------------------------------------------
// Scoring

double likelihood_from_distance(double squared_distance) {
  if (squared_distance <= 0.0) return 1.0;
  return -std::expm1(-1.0 / squared_distance);
}

double score_branch_plain(const ObservationLog& obs, const Branch& b) {
  if (obs.empty()) throw std::invalid_argument("score_branch_plain: no observations");
  const auto t = static_cast<int>(obs.prefix_signatures().size() - 1);
  auto it = std::upper_bound(b.timesteps.begin(), b.timesteps.end(), t);
  const auto idx = it == b.timesteps.begin() ? 0 : std::distance(b.timesteps.begin(), it) - 1;
  return likelihood_from_distance(
      squared_distance(obs.prefix_signatures().back(), b.nodes[static_cast<std::size_t>(idx)]));
}

double score_branch_dtw(const ObservationLog& obs, const Branch& b, std::size_t radius,
                        DtwReduction reduction) {
  if (obs.empty()) throw std::invalid_argument("score_branch_dtw: no observations");
  const auto& sigs = obs.prefix_signatures();
  const WarpingPath path = dtw_fast(sigs, b.nodes, radius);
  double total = 0.0;
  for (const auto& [i, j] : first_occurrence_map(path)) total += squared_distance(sigs[i - 1], b.nodes[j - 1]);
  if (reduction == DtwReduction::mean) total /= static_cast<double>(sigs.size());
  return likelihood_from_distance(total);
}

std::map<GoalId, double> aggregate(std::span<const std::pair<GoalId, double>> scores, Aggregation mode) {
  std::map<GoalId, double> out;
  std::map<GoalId, std::size_t> counts;
  for (const auto& [g, p] : scores) {
    auto [it, fresh] = out.try_emplace(g, 0.0);
    if (mode == Aggregation::max) {
      it->second = std::max(it->second, p);
    } else {
      auto& n = counts[g];
      it->second += (p - it->second) / static_cast<double>(n + 1);
      ++n;
    }
  }
  return out;
}

GoalPosterior normalize(const std::map<GoalId, double>& raw, std::span<const GoalId> goals,
                        std::span<const double> priors) {
  if (!priors.empty() && priors.size() != goals.size())
    throw std::invalid_argument("normalize: prior count does not match goal count");
  GoalPosterior post;
  post.goals.assign(goals.begin(), goals.end());
  post.probabilities.resize(goals.size(), 0.0);
  const double uniform = goals.empty() ? 0.0 : 1.0 / static_cast<double>(goals.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    auto it = raw.find(goals[i]);
    const double score = it == raw.end() ? 0.0 : it->second;
    if (score < 0.0) throw std::invalid_argument("normalize: negative score");
    const double w = score * (priors.empty() ? uniform : priors[i]);
    post.probabilities[i] = w;
    sum += w;
  }
  if (sum > 0.0) {
    for (auto& p : post.probabilities) p /= sum;
  } else {
    std::fill(post.probabilities.begin(), post.probabilities.end(), uniform);
    post.degenerate = true;
  }
  post.normalized = true;
  return post;
}

Series interpolate_missing(std::span<const double> from, long from_t, std::span<const double> to, long to_t) {
  if (from.size() != to.size()) throw std::invalid_argument("interpolate_missing: dimension mismatch");
  if (to_t <= from_t) throw std::invalid_argument("interpolate_missing: timesteps must increase");
  Series out;
  const auto span_t = static_cast<double>(to_t - from_t);
  for (long s = from_t + 1; s < to_t; ++s) {
    const auto steps = static_cast<double>(s - from_t);
    std::vector<double> v(from.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = from[i] + (to[i] - from[i]) * steps / span_t;
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine

RecognitionEngine::RecognitionEngine(RecognitionProblem problem)
    : problem_(std::move(problem)),
      log_(problem_.tree ? problem_.tree->dim() : 1, problem_.config.depth) {
  if (!problem_.tree) throw std::invalid_argument("recognition problem has no tree");
  const auto& tree = *problem_.tree;
  problem_.config.validate(problem_.goals.size());
  if (tree.depth() != problem_.config.depth)
    throw std::invalid_argument("tree depth " + std::to_string(tree.depth()) +
                                " does not match configured depth " + std::to_string(problem_.config.depth));
  if (problem_.initial_state.size() != tree.dim())
    throw std::invalid_argument("initial state dimension does not match the tree");
  for (const auto& g : problem_.goals) {
    if (!g.state.empty() && g.state.size() != tree.dim())
      throw std::invalid_argument("goal " + std::to_string(g.id) + " state dimension does not match the tree");
    goal_ids_.push_back(g.id);
  }
  for (GoalId g : tree.goal_ids())
    if (std::find(goal_ids_.begin(), goal_ids_.end(), g) == goal_ids_.end())
      throw std::invalid_argument("tree labels goal " + std::to_string(g) + " which the problem does not list");
  branches_ = sigrec::branches(tree);
  posterior_ = normalize({}, goal_ids_, problem_.config.priors);
  if (!problem_.config.priors.empty()) posterior_.probabilities = problem_.config.priors;
  posterior_.degenerate = false;
}

void RecognitionEngine::check_dimension(std::span<const double> o) const {
  if (o.size() != log_.dim())
    throw std::invalid_argument("observation dimension " + std::to_string(o.size()) +
                                " does not match problem dimension " + std::to_string(log_.dim()));
  require_finite(o, "observation");
}

bool RecognitionEngine::check_goal_reached(std::span<const double> o) {
  const double tol = problem_.config.goal_match_tolerance;
  for (const auto& g : problem_.goals) {
    if (g.state.empty()) continue;
    bool same = true;
    for (std::size_t i = 0; i < o.size() && same; ++i) same = std::abs(o[i] - g.state[i]) <= tol;
    if (same) {
      terminated_ = true;
      return true;
    }
  }
  return false;
}

GoalPosterior RecognitionEngine::observe(long t, std::span<const double> o) {
  if (terminated_) throw std::logic_error("observe: episode already ended at a goal state");
  check_dimension(o);
  if (t < 0) throw std::invalid_argument("observe: negative timestep");
  if (t <= log_.last_t())
    throw std::invalid_argument("observe: timestep " + std::to_string(t) + " is not after " +
                                std::to_string(log_.last_t()));
  if (check_goal_reached(o)) return posterior_;

  if (log_.filled().empty() && t > 0) log_.append_filled(problem_.initial_state);
  const auto last_filled = static_cast<long>(log_.filled().size()) - 1;
  if (!log_.filled().empty() && t > last_filled + 1) {
    for (const auto& v : interpolate_missing(log_.filled().back(), last_filled, o, t)) log_.append_filled(v);
  }
  log_.append_received(t, o);
  log_.append_filled(o);
  return update();
}

GoalPosterior RecognitionEngine::observe_next(std::span<const double> o) {
  if (terminated_) throw std::logic_error("observe_next: episode already ended at a goal state");
  check_dimension(o);
  if (check_goal_reached(o)) return posterior_;
  log_.append_received(log_.last_t() + 1, o);
  log_.append_filled(o);
  return update();
}

GoalPosterior RecognitionEngine::update() {
  const auto& cfg = problem_.config;
  scores_ = cfg.parallel ? kernels::score_branches_parallel(log_, branches_, cfg)
                         : kernels::score_branches_serial(log_, branches_, cfg);
  std::vector<std::pair<GoalId, double>> labeled;
  labeled.reserve(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) labeled.emplace_back(branches_[i].goal, scores_[i]);
  posterior_ = normalize(aggregate(labeled, cfg.aggregation), goal_ids_, cfg.priors);
  return posterior_;
}

}  // namespace sigrec
