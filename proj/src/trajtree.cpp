#include "sigrec/trajtree.hpp"

#include <algorithm>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sigrec/kernels.hpp"

namespace sigrec {

namespace {

void insert_sorted(std::vector<GoalId>& v, GoalId g) {
  auto it = std::lower_bound(v.begin(), v.end(), g);
  if (it == v.end() || *it != g) v.insert(it, g);
}

void union_into(std::vector<GoalId>& dst, const std::vector<GoalId>& src) {
  for (GoalId g : src) insert_sorted(dst, g);
}

}  // namespace

// ---------------------------------------------------------------------------
// TrajectoryTree

TrajectoryTree::TrajectoryTree(std::size_t dim, std::size_t depth) : dim_(dim), depth_(depth) {
  TreeNode root;
  root.value = PathSignature(dim, depth).values();
  nodes_.push_back(std::move(root));
}

std::size_t TrajectoryTree::add_child(std::size_t parent, std::vector<double> value, int timestep) {
  TreeNode n;
  n.value = std::move(value);
  n.timestep = timestep;
  n.parent = static_cast<std::ptrdiff_t>(parent);
  nodes_.push_back(std::move(n));
  const std::size_t idx = nodes_.size() - 1;
  nodes_[parent].children.push_back(idx);
  return idx;
}

void TrajectoryTree::compact(const std::vector<bool>& alive) {
  std::vector<TreeNode> out;
  out.reserve(nodes_.size());
  // (old index, new parent index)
  std::vector<std::pair<std::size_t, std::ptrdiff_t>> stack{{0, -1}};
  while (!stack.empty()) {
    auto [old, parent] = stack.back();
    stack.pop_back();
    if (!alive[old]) throw std::logic_error("compact: live node points at a deleted child");
    TreeNode n = std::move(nodes_[old]);
    const std::vector<std::size_t> kids = std::move(n.children);
    n.children.clear();
    n.parent = parent;
    const std::size_t idx = out.size();
    if (parent >= 0) out[static_cast<std::size_t>(parent)].children.push_back(idx);
    out.push_back(std::move(n));
    for (auto it = kids.rbegin(); it != kids.rend(); ++it)
      stack.emplace_back(*it, static_cast<std::ptrdiff_t>(idx));
  }
  nodes_ = std::move(out);
}

std::size_t TrajectoryTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.children.empty(); }));
}

std::size_t TrajectoryTree::height() const {
  std::vector<std::size_t> level(nodes_.size(), 1);
  std::size_t h = 1;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    level[i] = level[static_cast<std::size_t>(nodes_[i].parent)] + 1;
    h = std::max(h, level[i]);
  }
  return h;
}

std::vector<std::size_t> TrajectoryTree::level_widths() const {
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::vector<std::size_t> widths{1};
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    level[i] = level[static_cast<std::size_t>(nodes_[i].parent)] + 1;
    if (widths.size() <= level[i]) widths.resize(level[i] + 1, 0);
    ++widths[level[i]];
  }
  return widths;
}

// ---------------------------------------------------------------------------
// Construction

TrajectoryTree build_tree(std::span<const LabeledTrajectory> trajs, std::size_t depth, bool parallel) {
  if (trajs.empty()) throw std::invalid_argument("build_tree: no trajectories");
  const std::size_t dim = trajs.front().trajectory.dim();
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (trajs[i].trajectory.empty())
      throw std::invalid_argument("build_tree: trajectory " + std::to_string(i) + " is empty");
    if (trajs[i].trajectory.dim() != dim)
      throw std::invalid_argument("build_tree: trajectory " + std::to_string(i) +
                                  " has dimension " + std::to_string(trajs[i].trajectory.dim()) +
                                  ", expected " + std::to_string(dim));
  }
  signature_length(dim, depth);  // validates depth

  const kernels::PrefixTable prefixes = parallel ? kernels::prefix_signatures_parallel(trajs, depth)
                                                 : kernels::prefix_signatures_serial(trajs, depth);

  TrajectoryTree tree(dim, depth);
  const auto first = trajs.front().trajectory[0];
  tree.initial_state_.assign(first.begin(), first.end());

  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& lt = trajs[i];
    insert_sorted(tree.goal_ids_, lt.goal);
    if (!tree.goal_states_.contains(lt.goal)) {
      const auto last = lt.trajectory[lt.trajectory.size() - 1];
      tree.goal_states_[lt.goal] = std::vector<double>(last.begin(), last.end());
    }
    std::size_t at = 0;
    insert_sorted(tree.nodes_[0].goals, lt.goal);
    for (std::size_t t = 1; t < prefixes[i].size(); ++t) {
      const auto& sig = prefixes[i][t];
      std::size_t next = std::numeric_limits<std::size_t>::max();
      for (std::size_t c : tree.nodes_[at].children) {
        if (tree.nodes_[c].value == sig) {
          next = c;
          break;
        }
      }
      if (next == std::numeric_limits<std::size_t>::max())
        next = tree.add_child(at, sig, static_cast<int>(t));
      at = next;
      insert_sorted(tree.nodes_[at].goals, lt.goal);
    }
    insert_sorted(tree.nodes_[at].terminal, lt.goal);
  }
  tree.compact(std::vector<bool>(tree.nodes_.size(), true));
  return tree;
}

// ---------------------------------------------------------------------------
// Merge and prune

TrajectoryTree merge(TrajectoryTree tree, double eps_merge) {
  if (eps_merge < 0.0) throw std::invalid_argument("merge: threshold must be nonnegative");
  auto& nodes = tree.nodes_;
  std::vector<bool> alive(nodes.size(), true);
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t n = queue.front();
    queue.pop_front();
    bool merged = true;
    while (merged) {
      merged = false;
      auto& kids = nodes[n].children;
      for (std::size_t z = 0; z < kids.size() && !merged; ++z) {
        for (std::size_t j = z + 1; j < kids.size(); ++j) {
          TreeNode& left = nodes[kids[z]];
          TreeNode& right = nodes[kids[j]];
          if (!(squared_distance(left.value, right.value) < eps_merge)) continue;
          for (std::size_t e = 0; e < left.value.size(); ++e)
            left.value[e] = 0.5 * (left.value[e] + right.value[e]);
          for (std::size_t c : right.children) {
            nodes[c].parent = static_cast<std::ptrdiff_t>(kids[z]);
            left.children.push_back(c);
          }
          union_into(left.goals, right.goals);
          union_into(left.terminal, right.terminal);
          alive[kids[j]] = false;
          kids.erase(kids.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
    for (std::size_t c : nodes[n].children) queue.push_back(c);
  }
  tree.compact(alive);
  return tree;
}

TrajectoryTree prune(TrajectoryTree tree, double eps_prune) {
  if (eps_prune < 0.0) throw std::invalid_argument("prune: threshold must be nonnegative");
  auto& nodes = tree.nodes_;
  std::vector<bool> alive(nodes.size(), true);
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t n = queue.front();
    queue.pop_front();
    std::size_t i = 0;
    while (i < nodes[n].children.size()) {
      const std::size_t c = nodes[n].children[i];
      const bool protected_leaf = n == 0 && nodes[c].children.empty();
      if (protected_leaf || !(squared_distance(nodes[n].value, nodes[c].value) < eps_prune)) {
        ++i;
        continue;
      }
      std::vector<std::size_t> adopted = std::move(nodes[c].children);
      for (std::size_t g : adopted) nodes[g].parent = static_cast<std::ptrdiff_t>(n);
      union_into(nodes[n].terminal, nodes[c].terminal);
      alive[c] = false;
      auto& kids = nodes[n].children;
      kids.erase(kids.begin() + static_cast<std::ptrdiff_t>(i));
      kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(i), adopted.begin(), adopted.end());
    }
    for (std::size_t c : nodes[n].children) queue.push_back(c);
  }
  tree.compact(alive);
  return tree;
}

TrajectoryTree compress(TrajectoryTree tree, double eps_merge, double eps_prune) {
  return prune(merge(std::move(tree), eps_merge), eps_prune);
}

// ---------------------------------------------------------------------------
// Queries

std::vector<Branch> branches(const TrajectoryTree& tree) {
  std::vector<Branch> out;
  const auto nodes = tree.nodes();
  std::vector<std::size_t> path;
  // Pre-order storage: a node's parent is always already on the path.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto parent = nodes[i].parent;
    while (!path.empty() && static_cast<std::ptrdiff_t>(path.back()) != parent) path.pop_back();
    path.push_back(i);
    for (GoalId g : nodes[i].terminal) {
      Branch b;
      b.goal = g;
      b.nodes.reserve(path.size());
      b.timesteps.reserve(path.size());
      for (std::size_t p : path) {
        b.nodes.push_back(nodes[p].value);
        b.timesteps.push_back(nodes[p].timestep);
      }
      out.push_back(std::move(b));
    }
  }
  return out;
}

TreeDiagnostics validate(const TrajectoryTree& tree, std::span<const GoalId> goals) {
  TreeDiagnostics d;
  d.leaf_count = tree.leaf_count();
  d.node_count = tree.node_count();
  d.height = tree.height();
  d.level_widths = tree.level_widths();
  const std::set<GoalId> goal_set(goals.begin(), goals.end());
  d.goal_count = goal_set.size();
  d.too_few_leaves = d.leaf_count < d.goal_count;
  std::set<GoalId> with_branch;
  std::set<GoalId> multi;
  for (const auto& n : tree.nodes()) {
    d.branch_count += n.terminal.size();
    with_branch.insert(n.terminal.begin(), n.terminal.end());
    if (n.terminal.size() > 1) multi.insert(n.terminal.begin(), n.terminal.end());
  }
  d.multi_goal_leaves.assign(multi.begin(), multi.end());
  for (GoalId g : goal_set)
    if (!with_branch.contains(g)) d.goals_without_branch.push_back(g);
  return d;
}

void write_diagnostics(std::ostream& os, const TreeDiagnostics& d) {
  os << "nodes: " << d.node_count << '\n'
     << "leaves: " << d.leaf_count << '\n'
     << "branches: " << d.branch_count << '\n'
     << "height: " << d.height << '\n'
     << "goals: " << d.goal_count << '\n'
     << "level widths:";
  for (auto w : d.level_widths) os << ' ' << w;
  os << '\n';
  if (d.too_few_leaves)
    os << "VIOLATION: leaf count " << d.leaf_count << " is below goal count " << d.goal_count << '\n';
  if (!d.multi_goal_leaves.empty()) {
    os << "VIOLATION: leaves shared by several goals:";
    for (auto g : d.multi_goal_leaves) os << ' ' << g;
    os << '\n';
  }
  if (!d.goals_without_branch.empty()) {
    os << "VIOLATION: goals without a branch:";
    for (auto g : d.goals_without_branch) os << ' ' << g;
    os << '\n';
  }
  if (d.ok()) os << "status: ok\n";
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kTreeFormatVersion = 1;

void write_values(std::ostream& os, std::span<const double> v) {
  for (double x : v) os << ' ' << x;
}

void write_ids(std::ostream& os, const std::vector<GoalId>& ids) {
  os << ' ' << ids.size();
  for (GoalId g : ids) os << ' ' << g;
}

std::vector<double> read_values(std::istream& is, std::size_t n, const char* what) {
  std::vector<double> v(n);
  for (auto& x : v)
    if (!(is >> x)) throw std::runtime_error(std::string("read_tree: truncated ") + what);
  return v;
}

std::vector<GoalId> read_ids(std::istream& is) {
  std::size_t n = 0;
  if (!(is >> n)) throw std::runtime_error("read_tree: missing label count");
  std::vector<GoalId> ids(n);
  for (auto& g : ids)
    if (!(is >> g)) throw std::runtime_error("read_tree: truncated label list");
  return ids;
}

void expect(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word)
    throw std::runtime_error("read_tree: expected '" + word + "', found '" + got + "'");
}

}  // namespace

void write_tree(std::ostream& os, const TrajectoryTree& tree) {
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "SIGTREE " << kTreeFormatVersion << '\n';
  os << "dim " << tree.dim() << " depth " << tree.depth() << " nodes " << tree.node_count()
     << " goals " << tree.goal_ids().size() << '\n';
  os << "initial";
  write_values(os, tree.initial_state());
  os << '\n';
  for (GoalId g : tree.goal_ids()) {
    os << "goal " << g;
    auto it = tree.goal_states().find(g);
    if (it != tree.goal_states().end()) write_values(os, it->second);
    os << '\n';
  }
  for (const auto& n : tree.nodes()) {
    os << "node " << n.parent << ' ' << n.timestep;
    write_ids(os, n.goals);
    write_ids(os, n.terminal);
    write_values(os, n.value);
    os << '\n';
  }
  os.precision(old_prec);
}

TrajectoryTree read_tree(std::istream& is) {
  int version = 0;
  expect(is, "SIGTREE");
  if (!(is >> version) || version != kTreeFormatVersion)
    throw std::runtime_error("read_tree: unsupported format version");
  std::size_t dim = 0, depth = 0, count = 0, goals = 0;
  expect(is, "dim");
  is >> dim;
  expect(is, "depth");
  is >> depth;
  expect(is, "nodes");
  is >> count;
  expect(is, "goals");
  is >> goals;
  if (!is || count == 0) throw std::runtime_error("read_tree: bad header");
  const std::size_t len = signature_length(dim, depth);

  TrajectoryTree tree(dim, depth);
  tree.nodes_.clear();
  expect(is, "initial");
  tree.initial_state_ = read_values(is, dim, "initial state");
  for (std::size_t g = 0; g < goals; ++g) {
    expect(is, "goal");
    GoalId id = 0;
    if (!(is >> id)) throw std::runtime_error("read_tree: bad goal record");
    tree.goal_ids_.push_back(id);
    tree.goal_states_[id] = read_values(is, dim, "goal state");
  }
  std::sort(tree.goal_ids_.begin(), tree.goal_ids_.end());
  for (std::size_t i = 0; i < count; ++i) {
    expect(is, "node");
    TreeNode n;
    if (!(is >> n.parent >> n.timestep)) throw std::runtime_error("read_tree: bad node record");
    if (i == 0 ? n.parent != -1 : (n.parent < 0 || static_cast<std::size_t>(n.parent) >= i))
      throw std::runtime_error("read_tree: node " + std::to_string(i) + " has an invalid parent");
    n.goals = read_ids(is);
    n.terminal = read_ids(is);
    n.value = read_values(is, len, "signature payload");
    if (n.parent >= 0) tree.nodes_[static_cast<std::size_t>(n.parent)].children.push_back(i);
    tree.nodes_.push_back(std::move(n));
  }
  return tree;
}

}  // namespace sigrec
