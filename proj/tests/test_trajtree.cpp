#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sigrec/trajtree.hpp"

using namespace sigrec;

namespace {

LabeledTrajectory make(GoalId g, const std::vector<std::vector<double>>& pts) {
  return {Trajectory::from_points(pts), g};
}

// The four 4-step example trajectories: flat, bending up, rising from below,
// and flat with a small bump at t = 2.
std::vector<LabeledTrajectory> example_trajectories(bool with_bump) {
  std::vector<LabeledTrajectory> out;
  std::vector<std::vector<double>> tau, tau1, tau2, tau3;
  for (int t = 1; t <= 4; ++t) {
    tau.push_back({double(t), 2.0});
    tau1.push_back({double(t), std::max(double(t), 2.0)});
    tau2.push_back({double(t), std::min(2.0, t - 1.0)});
    tau3.push_back({double(t), 0.1 * std::exp(-(t - 2.0) * (t - 2.0) / (2 * 0.158 * 0.158)) + 2.0});
  }
  out.push_back(make(0, tau));
  out.push_back(make(1, tau1));
  out.push_back(make(0, tau2));
  if (with_bump) out.push_back(make(2, tau3));
  return out;
}

// Index of the node reached by following `traj`'s chain of prefix signatures.
std::vector<std::size_t> chain(const TrajectoryTree& tree, const Trajectory& traj) {
  const auto prefixes = prefix_signatures(traj, tree.depth());
  std::vector<std::size_t> out{0};
  for (std::size_t t = 1; t < prefixes.size(); ++t) {
    bool found = false;
    for (std::size_t c : tree.node(out.back()).children) {
      if (tree.node(c).value == prefixes[t].values()) {
        out.push_back(c);
        found = true;
        break;
      }
    }
    if (!found) return out;
  }
  return out;
}

std::size_t shared_nodes(const TrajectoryTree& tree, const Trajectory& a, const Trajectory& b) {
  const auto ca = chain(tree, a), cb = chain(tree, b);
  std::size_t n = 0;
  while (n < ca.size() && n < cb.size() && ca[n] == cb[n]) ++n;
  return n;
}

TrajectoryTree tree_from_text(const std::string& text) {
  std::istringstream is(text);
  return read_tree(is);
}

std::vector<LabeledTrajectory> random_integer_paths(std::mt19937_64& rng, std::size_t count, std::size_t goals) {
  std::uniform_int_distribution<int> step(-1, 1);
  std::uniform_int_distribution<std::size_t> len(2, 8);
  std::vector<LabeledTrajectory> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::vector<double>> pts{{0, 0}};
    const std::size_t n = len(rng);
    while (pts.size() < n) pts.push_back({pts.back()[0] + step(rng), pts.back()[1] + step(rng)});
    out.push_back(make(static_cast<GoalId>(i % goals), pts));
  }
  return out;
}

std::multiset<GoalId> terminal_labels(const TrajectoryTree& tree) {
  std::multiset<GoalId> s;
  for (const auto& n : tree.nodes()) s.insert(n.terminal.begin(), n.terminal.end());
  return s;
}

}  // namespace

TEST(BuildTree, SingleTrajectoryIsAChain) {
  const std::vector<LabeledTrajectory> trajs{make(3, {{0, 0}, {1, 0}, {1, 1}, {2, 3}})};
  const auto tree = build_tree(trajs, 2);
  EXPECT_EQ(tree.node_count(), 4u);
  EXPECT_EQ(tree.height(), 4u);
  EXPECT_EQ(tree.leaf_count(), 1u);
  EXPECT_EQ(tree.root().value, PathSignature(2, 2).values());
  for (std::size_t i = 1; i < tree.node_count(); ++i) {
    EXPECT_EQ(tree.node(i).parent, static_cast<std::ptrdiff_t>(i - 1));
    EXPECT_EQ(tree.node(i).timestep, static_cast<int>(i));
  }
  EXPECT_EQ(tree.node(3).terminal, std::vector<GoalId>{3});
  EXPECT_EQ(branches(tree).size(), 1u);
}

TEST(BuildTree, ExampleSharingPattern) {
  const auto trajs = example_trajectories(false);
  const auto tree = build_tree(trajs, 2);
  // Flat and bending paths agree on their first two states.
  EXPECT_EQ(shared_nodes(tree, trajs[0].trajectory, trajs[1].trajectory), 2u);
  // The path rising from below shares only the root with either.
  EXPECT_EQ(shared_nodes(tree, trajs[0].trajectory, trajs[2].trajectory), 1u);
  EXPECT_EQ(shared_nodes(tree, trajs[1].trajectory, trajs[2].trajectory), 1u);
  EXPECT_EQ(tree.root().children.size(), 2u);
  EXPECT_EQ(tree.leaf_count(), 3u);
  EXPECT_EQ(branches(tree).size(), 3u);
  EXPECT_EQ(tree.node_count(), 1u + 3u + 2u + 3u);
  const GoalId goals[] = {0, 1};
  EXPECT_TRUE(validate(tree, goals).ok());
}

TEST(BuildTree, SmallBumpOpensNewBranchAtRoot) {
  const auto trajs = example_trajectories(true);
  const auto tree = build_tree(trajs, 2);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(shared_nodes(tree, trajs[3].trajectory, trajs[i].trajectory), 1u) << i;
  EXPECT_EQ(tree.root().children.size(), 3u);
  EXPECT_EQ(branches(tree).size(), 4u);
}

TEST(BuildTree, SharesExactlyTheLongestCommonPrefix) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto trajs = random_integer_paths(rng, 6, 3);
    const auto tree = build_tree(trajs, 3);
    for (std::size_t a = 0; a < trajs.size(); ++a)
      for (std::size_t b = a + 1; b < trajs.size(); ++b) {
        const auto& ta = trajs[a].trajectory;
        const auto& tb = trajs[b].trajectory;
        std::size_t m = 0;
        while (m < ta.size() && m < tb.size() && std::equal(ta[m].begin(), ta[m].end(), tb[m].begin())) ++m;
        // Shared start, so the first differing state changes the level-1 term.
        EXPECT_EQ(shared_nodes(tree, ta, tb), m);
      }
  }
}

TEST(BuildTree, KTrajectoriesPerGoalGiveKTimesGLeaves) {
  std::vector<LabeledTrajectory> trajs;
  for (GoalId g = 0; g < 3; ++g)
    for (int k = 0; k < 2; ++k)
      trajs.push_back(make(g, {{0, 0}, {1.0 + g, 0.5 * k}, {2.0 + g, 1.0 + k}}));
  const auto tree = build_tree(trajs, 2);
  EXPECT_EQ(tree.leaf_count(), 6u);
  EXPECT_EQ(branches(tree).size(), 6u);
}

TEST(BuildTree, FifteenPerGoalSevenGoals) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<LabeledTrajectory> trajs;
  for (GoalId g = 0; g < 7; ++g)
    for (int k = 0; k < 15; ++k) {
      std::vector<std::vector<double>> pts{{0, 0}};
      for (int s = 0; s < 5; ++s) pts.push_back({pts.back()[0] + u(rng), pts.back()[1] + u(rng)});
      trajs.push_back(make(g, pts));
    }
  const auto tree = build_tree(trajs, 2);
  std::vector<GoalId> goals{0, 1, 2, 3, 4, 5, 6};
  const auto diag = validate(tree, goals);
  EXPECT_EQ(diag.leaf_count, 105u);
  EXPECT_EQ(diag.branch_count, 105u);
  EXPECT_TRUE(diag.ok());
}

TEST(BuildTree, TrajectoryEndingInsideAnotherIsTerminal) {
  const std::vector<LabeledTrajectory> trajs{make(0, {{0, 0}, {1, 0}, {2, 1}}), make(1, {{0, 0}, {1, 0}})};
  const auto tree = build_tree(trajs, 2);
  EXPECT_EQ(tree.leaf_count(), 1u);
  const auto bs = branches(tree);
  ASSERT_EQ(bs.size(), 2u);
  EXPECT_EQ(bs[0].goal, 1);
  EXPECT_EQ(bs[0].nodes.size(), 2u);
  EXPECT_EQ(bs[1].goal, 0);
  EXPECT_EQ(bs[1].nodes.size(), 3u);
}

TEST(BuildTree, Errors) {
  EXPECT_THROW(build_tree(std::vector<LabeledTrajectory>{}, 2), std::invalid_argument);
  const std::vector<LabeledTrajectory> mixed{make(0, {{0, 0}, {1, 1}}), make(1, {{0, 0, 0}})};
  EXPECT_THROW(build_tree(mixed, 2), std::invalid_argument);
  const std::vector<LabeledTrajectory> empty{{Trajectory(2), 0}};
  EXPECT_THROW(build_tree(empty, 2), std::invalid_argument);
  const std::vector<LabeledTrajectory> ok{make(0, {{0, 0}, {1, 1}})};
  EXPECT_THROW(build_tree(ok, 0), std::invalid_argument);
}

TEST(BuildTree, SerialAndParallelAgree) {
  std::mt19937_64 rng(33);
  const auto trajs = random_integer_paths(rng, 40, 4);
  EXPECT_EQ(build_tree(trajs, 3, false), build_tree(trajs, 3, true));
}

// ---------------------------------------------------------------------------
// Merge

TEST(Merge, IdenticalSiblingsCollapseKeepingValue) {
  const auto tree = tree_from_text(
      "SIGTREE 1\ndim 1 depth 1 nodes 3 goals 2\ninitial 0\ngoal 0 1\ngoal 1 1\n"
      "node -1 0 2 0 1 0 1 0\n"
      "node 0 1 1 0 1 0 1 1\n"
      "node 0 1 1 1 1 1 1 1\n");
  const auto merged = merge(tree, 1e-6);
  ASSERT_EQ(merged.node_count(), 2u);
  EXPECT_EQ(merged.node(1).value, (std::vector<double>{1, 1}));
  EXPECT_EQ(merged.node(1).terminal, (std::vector<GoalId>{0, 1}));
  const GoalId goals[] = {0, 1};
  const auto diag = validate(merged, goals);
  EXPECT_EQ(diag.multi_goal_leaves, (std::vector<GoalId>{0, 1}));
  EXPECT_TRUE(diag.too_few_leaves);
}

TEST(Merge, ThresholdStraddlesSiblingDistance) {
  const std::vector<LabeledTrajectory> trajs{make(0, {{0}, {1}}), make(1, {{0}, {1 + std::sqrt(0.3)}})};
  const auto tree = build_tree(trajs, 1);
  ASSERT_NEAR(squared_distance(tree.node(1).value, tree.node(2).value), 0.3, 1e-12);
  EXPECT_EQ(merge(tree, 0.2), tree);
  const auto merged = merge(tree, 0.4);
  EXPECT_EQ(merged.node_count(), 2u);
  EXPECT_NEAR(merged.node(1).value[1], 1 + std::sqrt(0.3) / 2, 1e-15);
}

TEST(Merge, RightmostChildrenMoveToLeftmost) {
  const std::vector<LabeledTrajectory> trajs{make(0, {{0}, {1}, {3}}), make(1, {{0}, {1.01}, {-2}})};
  const auto merged = merge(build_tree(trajs, 1), 0.01);
  ASSERT_EQ(merged.root().children.size(), 1u);
  const auto& mid = merged.node(merged.root().children[0]);
  ASSERT_EQ(mid.children.size(), 2u);
  EXPECT_EQ(merged.node(mid.children[0]).terminal, std::vector<GoalId>{0});
  EXPECT_EQ(merged.node(mid.children[1]).terminal, std::vector<GoalId>{1});
  EXPECT_EQ(mid.goals, (std::vector<GoalId>{0, 1}));
}

TEST(Merge, ZeroThresholdIsNoOp) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = build_tree(random_integer_paths(rng, 10, 3), 2);
    EXPECT_EQ(merge(tree, 0.0), tree);
  }
}

TEST(Merge, IdempotentAndMonotone) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 60; ++trial) {
    const auto tree = build_tree(random_integer_paths(rng, 12, 3), 2);
    const double eps = 0.5 * (trial % 7);
    const auto once = merge(tree, eps);
    EXPECT_EQ(merge(once, eps), once);
    EXPECT_LE(once.leaf_count(), tree.leaf_count());
    EXPECT_EQ(once.height(), tree.height());
    const auto before = tree.level_widths(), after = once.level_widths();
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t l = 0; l < before.size(); ++l) EXPECT_LE(after[l], before[l]);
    const auto a = terminal_labels(once), b = terminal_labels(tree);
    EXPECT_EQ(std::set<GoalId>(a.begin(), a.end()), std::set<GoalId>(b.begin(), b.end()));
  }
}

TEST(Merge, RejectsNegativeThreshold) {
  const auto tree = build_tree(example_trajectories(false), 2);
  EXPECT_THROW(merge(tree, -1.0), std::invalid_argument);
  EXPECT_THROW(prune(tree, -1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Prune

TEST(Prune, SmallStepChainCollapsesToTwoNodes) {
  // Ten steps of 0.01: successive signatures differ by at most ~0.02^2 in
  // squared distance, far below the threshold.
  std::vector<std::vector<double>> pts;
  for (int i = 0; i <= 10; ++i) pts.push_back({0.01 * i, 0.0});
  const std::vector<LabeledTrajectory> trajs{make(0, pts)};
  const auto tree = build_tree(trajs, 2);
  ASSERT_EQ(tree.node_count(), 11u);
  const auto pruned = prune(tree, 0.05);
  ASSERT_EQ(pruned.node_count(), 2u);
  EXPECT_EQ(pruned.node(1).timestep, 10);
  EXPECT_EQ(pruned.node(1).value, tree.node(10).value);
  EXPECT_EQ(pruned.node(1).terminal, std::vector<GoalId>{0});
}

TEST(Prune, KeepsOriginalTimesteps) {
  const std::vector<LabeledTrajectory> trajs{make(0, {{0}, {0.01}, {2}, {2.01}, {5}})};
  const auto pruned = prune(build_tree(trajs, 1), 0.01);
  std::vector<int> steps;
  for (const auto& n : pruned.nodes()) steps.push_back(n.timestep);
  EXPECT_EQ(steps, (std::vector<int>{0, 2, 4}));
}

TEST(Prune, ZeroThresholdIsNoOp) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = build_tree(random_integer_paths(rng, 10, 3), 2);
    EXPECT_EQ(prune(tree, 0.0), tree);
  }
}

TEST(Prune, IdempotentAndMonotone) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const auto tree = build_tree(random_integer_paths(rng, 12, 3), 2);
    const double eps = 0.5 * (trial % 9);
    const auto once = prune(tree, eps);
    EXPECT_EQ(prune(once, eps), once);
    EXPECT_LE(once.node_count(), tree.node_count());
    const auto a = terminal_labels(once), b = terminal_labels(tree);
    EXPECT_EQ(std::set<GoalId>(a.begin(), a.end()), std::set<GoalId>(b.begin(), b.end()));
  }
}

TEST(Prune, LeafUnderRootSurvives) {
  const std::vector<LabeledTrajectory> trajs{make(0, {{0, 0}, {0.001, 0}})};
  const auto pruned = prune(build_tree(trajs, 2), 10.0);
  EXPECT_EQ(pruned.node_count(), 2u);
  EXPECT_EQ(branches(pruned).size(), 1u);
}

TEST(Prune, CollapseBelowGoalCountIsFlagged) {
  // Two goals split by a last tiny step: pruning folds both leaves into the
  // node at t = 1.
  const std::vector<LabeledTrajectory> trajs{make(0, {{0}, {5}, {5.01}, {5.02}}),
                                             make(1, {{0}, {5}, {5.01}, {5.0}})};
  const auto tree = build_tree(trajs, 1);
  const GoalId goals[] = {0, 1};
  EXPECT_TRUE(validate(tree, goals).ok());
  const auto pruned = prune(tree, 0.5);
  const auto diag = validate(pruned, goals);
  EXPECT_LT(diag.leaf_count, 2u);
  EXPECT_TRUE(diag.too_few_leaves);
  EXPECT_EQ(diag.multi_goal_leaves, (std::vector<GoalId>{0, 1}));
  EXPECT_FALSE(diag.ok());
  EXPECT_EQ(terminal_labels(pruned), (std::multiset<GoalId>{0, 1}));
}

TEST(Compress, MergeThenPrune) {
  std::mt19937_64 rng(38);
  const auto tree = build_tree(random_integer_paths(rng, 12, 3), 2);
  EXPECT_EQ(compress(tree, 0.6, 0.4), prune(merge(tree, 0.6), 0.4));
}

// ---------------------------------------------------------------------------
// Diagnostics and serialization

TEST(Validate, MissingGoalIsReported) {
  const auto tree = build_tree(example_trajectories(false), 2);
  const GoalId goals[] = {0, 1, 7};
  const auto diag = validate(tree, goals);
  EXPECT_EQ(diag.goals_without_branch, std::vector<GoalId>{7});
  std::ostringstream os;
  write_diagnostics(os, diag);
  EXPECT_NE(os.str().find("VIOLATION"), std::string::npos);
}

TEST(Validate, ReportsShape) {
  const auto tree = build_tree(example_trajectories(true), 2);
  const GoalId goals[] = {0, 1, 2};
  const auto diag = validate(tree, goals);
  EXPECT_EQ(diag.height, 4u);
  EXPECT_EQ(diag.level_widths, (std::vector<std::size_t>{1, 3, 4, 4}));
  EXPECT_TRUE(diag.ok());
}

TEST(TreeSerialization, RoundTripIsExact) {
  std::mt19937_64 rng(39);
  const auto tree = compress(build_tree(random_integer_paths(rng, 15, 4), 3), 0.4, 0.2);
  std::stringstream ss;
  write_tree(ss, tree);
  EXPECT_EQ(read_tree(ss), tree);
}

TEST(TreeSerialization, RejectsBadInput) {
  EXPECT_THROW(tree_from_text("SIGTREE 9\n"), std::runtime_error);
  EXPECT_THROW(tree_from_text("SIGTREE 1\ndim 1 depth 1 nodes 1 goals 0\ninitial 0\nnode -1 0 0 0 1\n"),
               std::runtime_error);
  EXPECT_THROW(tree_from_text("SIGTREE 1\ndim 1 depth 1 nodes 2 goals 0\ninitial 0\n"
                              "node -1 0 0 0 1 0\nnode 5 1 0 0 1 0\n"),
               std::runtime_error);
}
