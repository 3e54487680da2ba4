#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

#include "sigrec/sampler.hpp"

using namespace sigrec;

namespace {

// Plain Dijkstra, octile moves, no corner cutting.
double dijkstra_cost(const GridMap& map, Cell s, Cell g) {
  const int w = map.width(), h = map.height();
  std::vector<double> dist(static_cast<std::size_t>(w * h), INFINITY);
  using E = std::pair<double, int>;
  std::priority_queue<E, std::vector<E>, std::greater<>> pq;
  dist[static_cast<std::size_t>(s.y * w + s.x)] = 0;
  pq.emplace(0.0, s.y * w + s.x);
  while (!pq.empty()) {
    auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(i)]) continue;
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        if (!map.traversable({x + dx, y + dy})) continue;
        if (dx && dy && (!map.traversable({x + dx, y}) || !map.traversable({x, y + dy}))) continue;
        const double nd = d + (dx && dy ? std::sqrt(2.0) : 1.0);
        const int j = (y + dy) * w + x + dx;
        if (nd < dist[static_cast<std::size_t>(j)]) {
          dist[static_cast<std::size_t>(j)] = nd;
          pq.emplace(nd, j);
        }
      }
  }
  return dist[static_cast<std::size_t>(g.y * w + g.x)];
}

GridMap random_map(std::mt19937_64& rng, int w, int h, double density) {
  GridMap m(w, h);
  std::bernoulli_distribution block(density);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (block(rng)) m.set_blocked({x, y});
  return m;
}

bool same_point(std::span<const double> p, double x, double y) { return p[0] == x && p[1] == y; }

// Every resampled state lies on a free cell and consecutive states see each other.
bool collision_free(const GridMap& map, const Trajectory& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!map.traversable({static_cast<int>(std::lround(t[i][0])), static_cast<int>(std::lround(t[i][1]))}))
      return false;
    if (i > 0 && !line_of_sight(map, t[i - 1][0], t[i - 1][1], t[i][0], t[i][1])) return false;
  }
  return true;
}

}  // namespace

TEST(ShortestPath, MatchesIndependentDijkstra) {
  std::mt19937_64 rng(61);
  int reachable = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto map = random_map(rng, 15, 12, 0.25);
    std::uniform_int_distribution<int> ux(0, 14), uy(0, 11);
    const Cell s{ux(rng), uy(rng)}, g{ux(rng), uy(rng)};
    const auto path = shortest_grid_path(map, s, g);
    const double want = (map.traversable(s) && map.traversable(g)) ? dijkstra_cost(map, s, g) : INFINITY;
    if (std::isinf(want)) {
      EXPECT_FALSE(path.has_value());
      continue;
    }
    ++reachable;
    ASSERT_TRUE(path.has_value());
    EXPECT_NEAR(path->cost, want, 1e-9);
    EXPECT_EQ(path->cells.front(), s);
    EXPECT_EQ(path->cells.back(), g);
  }
  EXPECT_GT(reachable, 10);
}

TEST(Sampler, EmptyMapSingleShortestPath) {
  const GridMap map(10, 10);
  const auto r = sample_k_trajectories(map, {{0, 0}, {9, 9}, 1, 7});
  ASSERT_EQ(r.trajectories.size(), 1u);
  const auto& t = r.trajectories[0];
  EXPECT_TRUE(same_point(t[0], 0, 0));
  EXPECT_TRUE(same_point(t[t.size() - 1], 9, 9));
  EXPECT_NEAR(r.grid_costs[0], 9 * std::sqrt(2.0), 1e-12);
  for (std::size_t i = 1; i < t.size(); ++i) {
    EXPECT_GE(t[i][0], t[i - 1][0]);
    EXPECT_GE(t[i][1], t[i - 1][1]);
  }
}

TEST(Sampler, KDistinctPathsReachGoal) {
  const GridMap map(10, 10);
  const auto r = sample_k_trajectories(map, {{0, 0}, {9, 9}, 3, 7});
  ASSERT_EQ(r.trajectories.size(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    const auto& t = r.trajectories[a];
    EXPECT_TRUE(same_point(t[0], 0, 0));
    EXPECT_TRUE(same_point(t[t.size() - 1], 9, 9));
    EXPECT_LE(r.grid_costs[a], 1.5 * r.grid_costs[0] + 1e-9);
    for (std::size_t b = a + 1; b < 3; ++b) EXPECT_NE(r.trajectories[a], r.trajectories[b]);
  }
}

TEST(Sampler, CollisionFreeOnObstacleMaps) {
  std::mt19937_64 rng(62);
  int sampled = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto map = random_map(rng, 20, 20, 0.15);
    map.set_blocked({0, 0}, false);
    map.set_blocked({19, 19}, false);
    try {
      const auto r = sample_k_trajectories(map, {{0, 0}, {19, 19}, 4, static_cast<std::uint64_t>(trial)});
      ++sampled;
      for (const auto& t : r.trajectories) EXPECT_TRUE(collision_free(map, t));
    } catch (const SamplingError& e) {
      for (const auto& t : e.partial().trajectories) EXPECT_TRUE(collision_free(map, t));
    }
  }
  EXPECT_GT(sampled, 5);
}

TEST(Sampler, SeededDeterminism) {
  const GridMap map(16, 16);
  const SampleRequest req{{1, 2}, {14, 11}, 5, 99};
  const auto a = sample_k_trajectories(map, req);
  const auto b = sample_k_trajectories(map, req);
  EXPECT_EQ(a.trajectories, b.trajectories);
  EXPECT_EQ(a.grid_costs, b.grid_costs);
}

TEST(Sampler, ResamplingStep) {
  const GridMap map(12, 3);
  SampleRequest req{{0, 1}, {11, 1}, 1, 0};
  req.step = 0.5;
  const auto r = sample_k_trajectories(map, req);
  const auto& t = r.trajectories[0];
  ASSERT_EQ(t.size(), 23u);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NEAR(t[i][0] - t[i - 1][0], 0.5, 1e-12);
}

TEST(Sampler, UnreachableGoal) {
  GridMap map(5, 5);
  map.set_blocked({4, 4});
  try {
    sample_k_trajectories(map, {{0, 0}, {4, 4}, 2, 1});
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_EQ(e.found(), 0u);
  }
  GridMap walled(5, 5);
  for (int y = 0; y < 5; ++y) walled.set_blocked({2, y});
  EXPECT_THROW(sample_k_trajectories(walled, {{0, 0}, {4, 4}, 1, 1}), SamplingError);
}

TEST(Sampler, CorridorReportsPartialResult) {
  // One-cell corridor: only one simple path exists.
  GridMap map(8, 3);
  for (int x = 0; x < 8; ++x) {
    map.set_blocked({x, 0});
    map.set_blocked({x, 2});
  }
  SampleRequest req{{0, 1}, {7, 1}, 3, 5};
  req.attempt_budget = 200;
  try {
    sample_k_trajectories(map, req);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_EQ(e.found(), 1u);
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(LineOfSight, BlockedCellStopsTheRay) {
  GridMap map(5, 5);
  EXPECT_TRUE(line_of_sight(map, 0, 0, 4, 4));
  map.set_blocked({2, 2});
  EXPECT_FALSE(line_of_sight(map, 0, 0, 4, 4));
  EXPECT_TRUE(line_of_sight(map, 0, 4, 4, 4));
}

TEST(LineOfSight, DiagonalThroughBlockedCornerIsRejected) {
  GridMap map(3, 3);
  EXPECT_TRUE(line_of_sight(map, 0, 0, 1, 1));
  map.set_blocked({1, 0});
  EXPECT_FALSE(line_of_sight(map, 0, 0, 1, 1));
  EXPECT_FALSE(line_of_sight(map, 0.5, 0.5, 0.5, 0.5));
  EXPECT_TRUE(line_of_sight(map, 0, 1, 2, 1));
  EXPECT_FALSE(line_of_sight(map, -1, 1, 0, 1));
}

// ---------------------------------------------------------------------------
// Files

TEST(MovingAiMap, ParsesTerrain) {
  std::istringstream in("type octile\nheight 2\nwidth 4\nmap\n.@GT\nSOW.\n");
  const auto map = read_movingai_map(in);
  EXPECT_EQ(map.width(), 4);
  EXPECT_EQ(map.height(), 2);
  EXPECT_TRUE(map.traversable({0, 0}));
  EXPECT_FALSE(map.traversable({1, 0}));
  EXPECT_TRUE(map.traversable({2, 0}));
  EXPECT_FALSE(map.traversable({3, 0}));
  EXPECT_TRUE(map.traversable({0, 1}));
  EXPECT_FALSE(map.traversable({1, 1}));
  EXPECT_FALSE(map.traversable({2, 1}));
  EXPECT_TRUE(map.traversable({3, 1}));
  std::ostringstream out;
  write_movingai_map(out, map);
  EXPECT_EQ(out.str(), "type octile\nheight 2\nwidth 4\nmap\n.@GT\nSOW.\n");
}

TEST(MovingAiMap, RejectsMalformed) {
  std::istringstream short_row("type octile\nheight 2\nwidth 3\nmap\n...\n..\n");
  EXPECT_THROW(read_movingai_map(short_row), std::runtime_error);
  std::istringstream no_header("map\n...\n");
  EXPECT_THROW(read_movingai_map(no_header), std::runtime_error);
  std::istringstream truncated("type octile\nheight 3\nwidth 1\nmap\n.\n");
  EXPECT_THROW(read_movingai_map(truncated), std::runtime_error);
}

TEST(TrajectoryFiles, RoundTripIsBitExact) {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<LabeledTrajectory> items;
  for (int i = 0; i < 5; ++i) {
    Trajectory t(3);
    for (int p = 0; p < 4 + i; ++p) t.push_back(std::vector<double>{u(rng), u(rng), u(rng) * 1e-7});
    items.push_back({t, i % 2});
  }
  const auto path = (std::filesystem::temp_directory_path() / "sigrec_traj_roundtrip.txt").string();
  save_trajectories(path, items);
  const auto back = load_trajectories(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.items.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(back.items[i].trajectory, items[i].trajectory);
    EXPECT_EQ(back.items[i].goal, items[i].goal);
  }
  EXPECT_TRUE(back.warnings.empty());
}

TEST(TrajectoryFiles, MixedDimensionsNameTheLine) {
  std::istringstream in("TRAJ 2 2\n0 2\n0 0\n1 1\n1 2\n0 0\n1 1 1\n");
  try {
    read_trajectories(in);
    FAIL() << "expected runtime_error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos) << e.what();
  }
}

TEST(TrajectoryFiles, EmptyFileWarns) {
  std::istringstream in("");
  const auto f = read_trajectories(in);
  EXPECT_TRUE(f.items.empty());
  ASSERT_EQ(f.warnings.size(), 1u);
}

TEST(TrajectoryFiles, MalformedRecords) {
  for (const char* text : {"TRAJ 2\n", "TRAJ 2 1\n0\n", "TRAJ 2 1\n0 2\n1 2\n", "TRAJ 2 1\n0 1\n1 x\n",
                           "TRAJ 2 1\n0 1\n1 2\n9 9\n", "TRAJ 2 1\n0 1\nnan 1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_trajectories(in), std::runtime_error) << text;
  }
  EXPECT_THROW(load_trajectories("/nonexistent/sigrec.txt"), std::runtime_error);
}

TEST(TrajectoryFiles, CommentsAreSkipped) {
  std::istringstream in("# header\nTRAJ 1 1\n# goal 4\n4 2\n0\n\n1\n");
  const auto f = read_trajectories(in);
  ASSERT_EQ(f.items.size(), 1u);
  EXPECT_EQ(f.items[0].goal, 4);
  EXPECT_EQ(f.items[0].trajectory.size(), 2u);
}

TEST(Mask, KeepsSelectedDimensions) {
  const auto t = Trajectory::from_points({{1, 2, 0.5}, {3, 4, 1.5}});
  const auto m = apply_mask(t, {true, true, false});
  EXPECT_EQ(m, Trajectory::from_points({{1, 2}, {3, 4}}));
  EXPECT_EQ(apply_mask(std::vector<double>{1, 2, 3}, {false, true, true}), (std::vector<double>{2, 3}));
  EXPECT_THROW(apply_mask(t, {true}), std::invalid_argument);
}
