#include "sigrec/kernels.hpp"

namespace sigrec::kernels {

namespace {

std::vector<std::vector<double>> prefix_terms(const Trajectory& traj, std::size_t depth) {
  std::vector<std::vector<double>> out;
  out.reserve(traj.size());
  SignatureStream stream(traj.dim(), depth);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    stream.extend(traj[t]);
    out.push_back(stream.signature().values());
  }
  return out;
}

double score_one(const ObservationLog& log, const Branch& b, const EngineConfig& config) {
  return config.mode == ScoringMode::plain ? score_branch_plain(log, b)
                                           : score_branch_dtw(log, b, config.dtw_radius, config.dtw_reduction);
}

}  // namespace

PrefixTable prefix_signatures_serial(std::span<const LabeledTrajectory> trajs, std::size_t depth) {
  PrefixTable out(trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) out[i] = prefix_terms(trajs[i].trajectory, depth);
  return out;
}

PrefixTable prefix_signatures_parallel(std::span<const LabeledTrajectory> trajs, std::size_t depth) {
  PrefixTable out(trajs.size());
  const auto n = static_cast<std::ptrdiff_t>(trajs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = prefix_terms(trajs[i].trajectory, depth);
  return out;
}

std::vector<double> score_branches_serial(const ObservationLog& log, std::span<const Branch> branches,
                                          const EngineConfig& config) {
  std::vector<double> scores(branches.size());
  for (std::size_t i = 0; i < branches.size(); ++i) scores[i] = score_one(log, branches[i], config);
  return scores;
}

std::vector<double> score_branches_parallel(const ObservationLog& log, std::span<const Branch> branches,
                                            const EngineConfig& config) {
  std::vector<double> scores(branches.size());
  const auto n = static_cast<std::ptrdiff_t>(branches.size());
  // Plain scoring is a single distance per branch; threads only pay off for DTW.
#pragma omp parallel for schedule(dynamic) if (config.mode == ScoringMode::dtw && n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) scores[i] = score_one(log, branches[i], config);
  return scores;
}

std::vector<double> dtw_cost_table_serial(std::span<const Series> a, std::span<const Series> b) {
  std::vector<double> out(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = dtw_exact(a[i], b[j]).total_cost;
  return out;
}

std::vector<double> dtw_cost_table_parallel(std::span<const Series> a, std::span<const Series> b) {
  std::vector<double> out(a.size() * b.size());
  const auto total = static_cast<std::ptrdiff_t>(out.size());
  const auto cols = static_cast<std::ptrdiff_t>(b.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < total; ++k) out[k] = dtw_exact(a[k / cols], b[k % cols]).total_cost;
  return out;
}

}  // namespace sigrec::kernels
