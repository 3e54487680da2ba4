#pragma once

// Data-parallel inner loops. Every parallel kernel has a serial reference
// with identical per-element arithmetic; results are written by index so
// the two agree bit for bit regardless of thread count.

#include <span>
#include <vector>

#include "sigrec/recognizer.hpp"
#include "sigrec/signature.hpp"
#include "sigrec/trajtree.hpp"

namespace sigrec::kernels {

using PrefixTable = std::vector<std::vector<std::vector<double>>>;

/// Prefix signature terms for every trajectory: out[i][t] = sig(traj_i[0..t]).
PrefixTable prefix_signatures_serial(std::span<const LabeledTrajectory> trajs, std::size_t depth);
PrefixTable prefix_signatures_parallel(std::span<const LabeledTrajectory> trajs, std::size_t depth);

/// Likelihood of every branch against the observation log.
std::vector<double> score_branches_serial(const ObservationLog& log, std::span<const Branch> branches,
                                          const EngineConfig& config);
std::vector<double> score_branches_parallel(const ObservationLog& log, std::span<const Branch> branches,
                                            const EngineConfig& config);

/// Pairwise exact DTW costs between two sets of series, row-major |a| x |b|.
std::vector<double> dtw_cost_table_serial(std::span<const Series> a, std::span<const Series> b);
std::vector<double> dtw_cost_table_parallel(std::span<const Series> a, std::span<const Series> b);

}  // namespace sigrec::kernels
