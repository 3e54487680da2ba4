#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigrec/signature.hpp"
#include "sigrec/trajtree.hpp"

namespace sigrec {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Occupancy grid. Cell (x, y) is centred on the continuous point (x, y).
class GridMap {
public:
  GridMap() = default;
  GridMap(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool in_bounds(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool traversable(Cell c) const noexcept { return in_bounds(c) && !blocked_[index(c)]; }
  void set_blocked(Cell c, bool blocked = true);

  /// Raw Moving-AI terrain characters, row y = line y of the map block.
  const std::vector<std::string>& rows() const noexcept { return rows_; }

private:
  friend GridMap read_movingai_map(std::istream&);
  std::size_t index(Cell c) const noexcept {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<bool> blocked_;
  std::vector<std::string> rows_;
};

/// Moving-AI benchmark map: "type", "height", "width", "map" header lines,
/// then one row of terrain characters per y. '.', 'G' and 'S' are passable;
/// '@', 'O', 'T' and 'W' are blocked.
GridMap read_movingai_map(std::istream& is);
void write_movingai_map(std::ostream& os, const GridMap& map);

struct GridPath {
  std::vector<Cell> cells;
  double cost = 0.0;  // octile length
};

/// 8-connected A* with octile costs; diagonal moves may not cut blocked corners.
std::optional<GridPath> shortest_grid_path(const GridMap& map, Cell start, Cell goal);

struct SampleRequest {
  Cell start;
  Cell goal;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  double spread = 0.5;            // detours may cost up to (1 + spread) x optimal
  std::size_t attempt_budget = 0; // 0 means 50 * k
  double step = 1.0;              // maximum spacing of the resampled continuous states
};

struct SampleResult {
  std::vector<Trajectory> trajectories;
  std::vector<double> grid_costs;  // octile length of the underlying grid path
};

class SamplingError : public std::runtime_error {
public:
  SamplingError(const std::string& what, SampleResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SampleResult& partial() const noexcept { return partial_; }
  std::size_t found() const noexcept { return partial_.trajectories.size(); }

private:
  SampleResult partial_;
};

/// K pairwise-distinct collision-free trajectories from start to goal.
/// Trajectory 0 follows a shortest grid path; the others route through a
/// random waypoint and stay within the spread bound. Each leg is smoothed by
/// line-of-sight shortcutting and split into pieces of at most `step`, keeping
/// every smoothed vertex; the last state
/// is exactly the goal. Deterministic for a given seed.
/// Throws SamplingError when the goal is unreachable or fewer than K distinct
/// paths turn up within the attempt budget (the partial result is attached).
SampleResult sample_k_trajectories(const GridMap& map, const SampleRequest& req);

/// Straight-line visibility between two continuous points.
bool line_of_sight(const GridMap& map, double x0, double y0, double x1, double y1);

// ---------------------------------------------------------------------------
// Trajectory files

struct TrajectoryFile {
  std::vector<LabeledTrajectory> items;
  std::vector<std::string> warnings;
};

/// Format: "TRAJ <d> <count>", then per trajectory a "<goal> <points>" line
/// followed by that many rows of d numbers. '#' starts a comment line.
/// Throws std::runtime_error naming the offending line on malformed input.
TrajectoryFile read_trajectories(std::istream& is);
TrajectoryFile load_trajectories(const std::string& path);
void write_trajectories(std::ostream& os, const std::vector<LabeledTrajectory>& items);
void save_trajectories(const std::string& path, const std::vector<LabeledTrajectory>& items);

/// Keeps only the dimensions whose mask entry is true.
Trajectory apply_mask(const Trajectory& traj, const std::vector<bool>& mask);
std::vector<double> apply_mask(std::span<const double> state, const std::vector<bool>& mask);

}  // namespace sigrec
