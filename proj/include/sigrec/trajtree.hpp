#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "sigrec/signature.hpp"

namespace sigrec {

using GoalId = int;

struct LabeledTrajectory {
  Trajectory trajectory;
  GoalId goal = 0;
};

struct TreeNode {
  std::vector<double> value;        // partial signature of the first timestep+1 states
  int timestep = 0;                 // original timestep, kept through pruning
  std::ptrdiff_t parent = -1;
  std::vector<std::size_t> children;
  std::vector<GoalId> goals;        // sorted; goals reachable through this node
  std::vector<GoalId> terminal;     // sorted; goals of trajectories that end here

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Root-to-terminal path. A terminal node carrying several goal labels yields
/// one Branch per label.
struct Branch {
  std::vector<std::vector<double>> nodes;
  std::vector<int> timesteps;
  GoalId goal = 0;
};

struct TreeDiagnostics {
  std::size_t leaf_count = 0;
  std::size_t branch_count = 0;
  std::size_t node_count = 0;
  std::size_t height = 0;                 // nodes on the longest root-to-leaf path
  std::vector<std::size_t> level_widths;  // node count per tree depth
  std::size_t goal_count = 0;
  bool too_few_leaves = false;            // leaf_count < |G|
  std::vector<GoalId> multi_goal_leaves;  // goals sharing a terminal node
  std::vector<GoalId> goals_without_branch;

  bool ok() const {
    return !too_few_leaves && multi_goal_leaves.empty() && goals_without_branch.empty();
  }
};

/// Tree of partial path signatures. Nodes live in a pre-order table; node 0
/// is the root and carries the trivial signature.
class TrajectoryTree {
public:
  TrajectoryTree(std::size_t dim, std::size_t depth);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const TreeNode& node(std::size_t i) const { return nodes_.at(i); }
  const TreeNode& root() const { return nodes_.front(); }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }

  /// Sorted ids of every goal that labelled an input trajectory.
  const std::vector<GoalId>& goal_ids() const noexcept { return goal_ids_; }
  const std::vector<double>& initial_state() const noexcept { return initial_state_; }
  const std::map<GoalId, std::vector<double>>& goal_states() const noexcept { return goal_states_; }

  std::size_t leaf_count() const;
  std::size_t height() const;
  std::vector<std::size_t> level_widths() const;

  friend bool operator==(const TrajectoryTree&, const TrajectoryTree&) = default;

private:
  friend TrajectoryTree build_tree(std::span<const LabeledTrajectory>, std::size_t, bool);
  friend TrajectoryTree merge(TrajectoryTree, double);
  friend TrajectoryTree prune(TrajectoryTree, double);
  friend TrajectoryTree read_tree(std::istream&);

  std::size_t add_child(std::size_t parent, std::vector<double> value, int timestep);
  void compact(const std::vector<bool>& alive);

  std::size_t dim_;
  std::size_t depth_;
  std::vector<TreeNode> nodes_;
  std::vector<GoalId> goal_ids_;
  std::vector<double> initial_state_;
  std::map<GoalId, std::vector<double>> goal_states_;
};

/// Inserts every trajectory's prefix-signature chain. Chains share a node
/// exactly when their partial signatures are bitwise equal. Prefix
/// signatures are computed with the OpenMP kernel when `parallel` is set.
/// Throws std::invalid_argument on empty input or mixed dimensions.
TrajectoryTree build_tree(std::span<const LabeledTrajectory> trajs, std::size_t depth,
                          bool parallel = true);

/// Breadth-first from the root: any sibling pair closer than eps_merge (squared
/// distance) merges right into left with averaged value; the scan of that
/// node's children restarts after each merge.
TrajectoryTree merge(TrajectoryTree tree, double eps_merge);

/// Top-down: a child closer than eps_prune (squared distance) to its parent is
/// removed and its children are adopted in place. A leaf hanging directly off
/// the root is never removed.
TrajectoryTree prune(TrajectoryTree tree, double eps_prune);

/// merge followed by prune.
TrajectoryTree compress(TrajectoryTree tree, double eps_merge, double eps_prune);

/// Depth-first, child order preserved.
std::vector<Branch> branches(const TrajectoryTree& tree);

TreeDiagnostics validate(const TrajectoryTree& tree, std::span<const GoalId> goals);
void write_diagnostics(std::ostream& os, const TreeDiagnostics& diag);

/// Versioned text format, see docs/FORMATS.md.
void write_tree(std::ostream& os, const TrajectoryTree& tree);
TrajectoryTree read_tree(std::istream& is);

}  // namespace sigrec
