#include "sigrec/sampler.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <tuple>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

namespace sigrec {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

bool passable_char(char c) { return c == '.' || c == 'G' || c == 'S'; }

double octile(Cell a, Cell b) {
  const double dx = std::abs(a.x - b.x);
  const double dy = std::abs(a.y - b.y);
  return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
}

using Point = std::array<double, 2>;

std::vector<Point> smooth(const GridMap& map, const std::vector<Cell>& cells) {
  std::vector<Point> out;
  if (cells.empty()) return out;
  std::size_t anchor = 0;
  out.push_back({double(cells[0].x), double(cells[0].y)});
  while (anchor + 1 < cells.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = cells.size() - 1; j > anchor + 1; --j) {
      if (line_of_sight(map, cells[anchor].x, cells[anchor].y, cells[j].x, cells[j].y)) {
        next = j;
        break;
      }
    }
    out.push_back({double(cells[next].x), double(cells[next].y)});
    anchor = next;
  }
  return out;
}

// Each polyline segment is split into equal pieces no longer than `step`.
// Vertices are kept so consecutive states never cut a smoothed corner.
Trajectory resample(const std::vector<Point>& poly, double step) {
  Trajectory traj(2);
  traj.push_back(poly.front());
  for (std::size_t s = 1; s < poly.size(); ++s) {
    const double dx = poly[s][0] - poly[s - 1][0];
    const double dy = poly[s][1] - poly[s - 1][1];
    const double len = std::hypot(dx, dy);
    if (len == 0.0) continue;
    const auto pieces = static_cast<int>(std::max(1.0, std::ceil(len / step - 1e-9)));
    for (int i = 1; i < pieces; ++i) {
      const double f = static_cast<double>(i) / pieces;
      traj.push_back(std::array<double, 2>{poly[s - 1][0] + f * dx, poly[s - 1][1] + f * dy});
    }
    traj.push_back(poly[s]);
  }
  return traj;
}

bool nearly_equal(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.flat().size(); ++i)
    if (std::abs(a.flat()[i] - b.flat()[i]) > 1e-9) return false;
  return true;
}

std::string line_error(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

}  // namespace

// ---------------------------------------------------------------------------
// GridMap

GridMap::GridMap(int width, int height)
    : width_(width), height_(height),
      blocked_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), false),
      rows_(static_cast<std::size_t>(height), std::string(static_cast<std::size_t>(width), '.')) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("grid map dimensions must be positive");
}

void GridMap::set_blocked(Cell c, bool blocked) {
  if (!in_bounds(c)) throw std::out_of_range("set_blocked: cell outside the map");
  blocked_[index(c)] = blocked;
  rows_[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)] = blocked ? '@' : '.';
}

GridMap read_movingai_map(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  int height = -1, width = -1;
  bool saw_type = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "type") {
      saw_type = true;
    } else if (key == "height") {
      ls >> height;
    } else if (key == "width") {
      ls >> width;
    } else if (key == "map") {
      break;
    } else if (!key.empty()) {
      throw std::runtime_error(line_error(lineno, "unexpected map header key '" + key + "'"));
    }
  }
  if (!saw_type || height <= 0 || width <= 0)
    throw std::runtime_error("map header must give type, height and width before 'map'");
  GridMap map(width, height);
  for (int y = 0; y < height; ++y) {
    if (!std::getline(is, line)) throw std::runtime_error("map ends after " + std::to_string(y) + " rows");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != width)
      throw std::runtime_error(line_error(lineno, "row has " + std::to_string(line.size()) +
                                                      " cells, expected " + std::to_string(width)));
    for (int x = 0; x < width; ++x) {
      const char c = line[static_cast<std::size_t>(x)];
      map.blocked_[map.index({x, y})] = !passable_char(c);
    }
    map.rows_[static_cast<std::size_t>(y)] = line;
  }
  return map;
}

void write_movingai_map(std::ostream& os, const GridMap& map) {
  os << "type octile\nheight " << map.height() << "\nwidth " << map.width() << "\nmap\n";
  for (const auto& row : map.rows()) os << row << '\n';
}

// ---------------------------------------------------------------------------
// Search

std::optional<GridPath> shortest_grid_path(const GridMap& map, Cell start, Cell goal) {
  if (!map.traversable(start) || !map.traversable(goal)) return std::nullopt;
  const int w = map.width();
  const auto idx = [w](Cell c) { return static_cast<std::size_t>(c.y * w + c.x); };
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(map.height());
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::ptrdiff_t> came(n, -1);
  std::vector<bool> closed(n, false);
  using Entry = std::tuple<double, std::uint64_t, int, int>;  // f, insertion order, x, y
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t order = 0;
  g[idx(start)] = 0.0;
  open.emplace(octile(start, goal), order++, start.x, start.y);
  while (!open.empty()) {
    auto [f, ord, x, y] = open.top();
    open.pop();
    const Cell cur{x, y};
    if (closed[idx(cur)]) continue;
    closed[idx(cur)] = true;
    if (cur == goal) break;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell nb{x + dx, y + dy};
        if (!map.traversable(nb) || closed[idx(nb)]) continue;
        if (dx != 0 && dy != 0 && (!map.traversable({x + dx, y}) || !map.traversable({x, y + dy}))) continue;
        const double cand = g[idx(cur)] + ((dx != 0 && dy != 0) ? kSqrt2 : 1.0);
        if (cand < g[idx(nb)]) {
          g[idx(nb)] = cand;
          came[idx(nb)] = static_cast<std::ptrdiff_t>(idx(cur));
          open.emplace(cand + octile(nb, goal), order++, nb.x, nb.y);
        }
      }
    }
  }
  if (!closed[idx(goal)]) return std::nullopt;
  GridPath path;
  path.cost = g[idx(goal)];
  for (auto at = static_cast<std::ptrdiff_t>(idx(goal)); at >= 0; at = came[static_cast<std::size_t>(at)])
    path.cells.push_back({static_cast<int>(at % w), static_cast<int>(at / w)});
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

// Supercover test: every cell whose closed square touches the segment must be
// free, so a segment through a corner needs all four cells around it.
bool line_of_sight(const GridMap& map, double x0, double y0, double x1, double y1) {
  constexpr double kTouch = 1e-9;
  // Shift so cell c spans [c, c + 1].
  const double ux0 = x0 + 0.5, uy0 = y0 + 0.5, ux1 = x1 + 0.5, uy1 = y1 + 0.5;
  if (!std::isfinite(ux0) || !std::isfinite(uy0) || !std::isfinite(ux1) || !std::isfinite(uy1)) return false;
  const double xlo = std::min(ux0, ux1), xhi = std::max(ux0, ux1);
  const int c_first = static_cast<int>(std::ceil(xlo - kTouch)) - 1;
  const int c_last = static_cast<int>(std::floor(xhi + kTouch));
  for (int c = c_first; c <= c_last; ++c) {
    const double a = std::max(xlo, static_cast<double>(c));
    const double b = std::min(xhi, static_cast<double>(c + 1));
    if (a > b + kTouch) continue;
    double ya = std::min(uy0, uy1), yb = std::max(uy0, uy1);
    if (ux1 != ux0) {
      const double slope = (uy1 - uy0) / (ux1 - ux0);
      ya = uy0 + (std::min(a, b) - ux0) * slope;
      yb = uy0 + (std::max(a, b) - ux0) * slope;
      if (ya > yb) std::swap(ya, yb);
    }
    const int r_first = static_cast<int>(std::ceil(ya - kTouch)) - 1;
    const int r_last = static_cast<int>(std::floor(yb + kTouch));
    for (int r = r_first; r <= r_last; ++r)
      if (!map.traversable({c, r})) return false;
  }
  return true;
}

SampleResult sample_k_trajectories(const GridMap& map, const SampleRequest& req) {
  if (req.k == 0) throw std::invalid_argument("sample_k_trajectories: K must be at least 1");
  if (!(req.step > 0.0)) throw std::invalid_argument("sample_k_trajectories: step must be positive");
  SampleResult result;
  const auto best = shortest_grid_path(map, req.start, req.goal);
  if (!best)
    throw SamplingError("goal (" + std::to_string(req.goal.x) + ", " + std::to_string(req.goal.y) +
                            ") is unreachable from (" + std::to_string(req.start.x) + ", " +
                            std::to_string(req.start.y) + ")",
                        std::move(result));
  result.trajectories.push_back(resample(smooth(map, best->cells), req.step));
  result.grid_costs.push_back(best->cost);

  std::mt19937_64 rng(req.seed);
  const int margin = std::max(3, static_cast<int>(std::ceil(0.5 * req.spread * best->cost)));
  const int x_lo = std::max(0, std::min(req.start.x, req.goal.x) - margin);
  const int x_hi = std::min(map.width() - 1, std::max(req.start.x, req.goal.x) + margin);
  const int y_lo = std::max(0, std::min(req.start.y, req.goal.y) - margin);
  const int y_hi = std::min(map.height() - 1, std::max(req.start.y, req.goal.y) + margin);
  std::uniform_int_distribution<int> pick_x(x_lo, x_hi);
  std::uniform_int_distribution<int> pick_y(y_lo, y_hi);
  const double bound = (1.0 + req.spread) * best->cost;
  const std::size_t budget = req.attempt_budget ? req.attempt_budget : 50 * req.k;

  for (std::size_t attempt = 0; attempt < budget && result.trajectories.size() < req.k; ++attempt) {
    const Cell via{pick_x(rng), pick_y(rng)};
    if (!map.traversable(via) || via == req.start || via == req.goal) continue;
    if (octile(req.start, via) + octile(via, req.goal) > bound) continue;
    const auto first = shortest_grid_path(map, req.start, via);
    if (!first) continue;
    const auto second = shortest_grid_path(map, via, req.goal);
    if (!second || first->cost + second->cost > bound) continue;
    auto poly = smooth(map, first->cells);
    const auto tail = smooth(map, second->cells);
    poly.insert(poly.end(), tail.begin() + 1, tail.end());
    Trajectory traj = resample(poly, req.step);
    const bool duplicate = std::any_of(result.trajectories.begin(), result.trajectories.end(),
                                       [&](const Trajectory& t) { return nearly_equal(t, traj); });
    if (duplicate) continue;
    result.trajectories.push_back(std::move(traj));
    result.grid_costs.push_back(first->cost + second->cost);
  }
  if (result.trajectories.size() < req.k) {
    const std::size_t found = result.trajectories.size();
    throw SamplingError("found only " + std::to_string(found) + " of " + std::to_string(req.k) +
                            " distinct trajectories within " + std::to_string(budget) + " attempts",
                        std::move(result));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trajectory files

TrajectoryFile read_trajectories(std::istream& is) {
  TrajectoryFile out;
  std::string line;
  std::size_t lineno = 0;
  const auto next_line = [&](std::string& dst) {
    while (std::getline(is, dst)) {
      ++lineno;
      const auto first = dst.find_first_not_of(" \t\r");
      if (first == std::string::npos || dst[first] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_line(line)) {
    out.warnings.push_back("trajectory file is empty");
    return out;
  }
  std::istringstream header(line);
  std::string tag;
  std::size_t dim = 0, count = 0;
  if (!(header >> tag >> dim >> count) || tag != "TRAJ" || dim == 0)
    throw std::runtime_error(line_error(lineno, "expected header 'TRAJ <d> <count>'"));

  for (std::size_t k = 0; k < count; ++k) {
    if (!next_line(line))
      throw std::runtime_error("file ends after " + std::to_string(k) + " of " + std::to_string(count) +
                               " trajectories");
    std::istringstream rec(line);
    GoalId goal = 0;
    std::size_t points = 0;
    std::string extra;
    if (!(rec >> goal >> points) || (rec >> extra) || points == 0)
      throw std::runtime_error(line_error(lineno, "expected '<goal> <points>' record"));
    Trajectory traj(dim);
    std::vector<double> row;
    for (std::size_t p = 0; p < points; ++p) {
      if (!next_line(line)) throw std::runtime_error("file ends inside trajectory " + std::to_string(k));
      std::istringstream ps(line);
      row.clear();
      double v = 0.0;
      while (ps >> v) row.push_back(v);
      if (!ps.eof()) throw std::runtime_error(line_error(lineno, "non-numeric value in point row"));
      if (row.size() != dim)
        throw std::runtime_error(line_error(lineno, "expected " + std::to_string(dim) + " values, found " +
                                                        std::to_string(row.size())));
      try {
        traj.push_back(row);
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(line_error(lineno, e.what()));
      }
    }
    out.items.push_back({std::move(traj), goal});
  }
  if (next_line(line)) throw std::runtime_error(line_error(lineno, "unexpected content after the last trajectory"));
  return out;
}

TrajectoryFile load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file '" + path + "'");
  try {
    return read_trajectories(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_trajectories(std::ostream& os, const std::vector<LabeledTrajectory>& items) {
  const std::size_t dim = items.empty() ? 1 : items.front().trajectory.dim();
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "TRAJ " << dim << ' ' << items.size() << '\n';
  for (const auto& it : items) {
    if (it.trajectory.dim() != dim) throw std::invalid_argument("write_trajectories: mixed dimensions");
    os << it.goal << ' ' << it.trajectory.size() << '\n';
    for (std::size_t p = 0; p < it.trajectory.size(); ++p) {
      const auto pt = it.trajectory[p];
      for (std::size_t i = 0; i < pt.size(); ++i) os << (i ? " " : "") << pt[i];
      os << '\n';
    }
  }
  os.precision(old_prec);
}

void save_trajectories(const std::string& path, const std::vector<LabeledTrajectory>& items) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file '" + path + "'");
  write_trajectories(out, items);
}

std::vector<double> apply_mask(std::span<const double> state, const std::vector<bool>& mask) {
  if (mask.empty()) return {state.begin(), state.end()};
  if (mask.size() != state.size()) throw std::invalid_argument("dimension mask length does not match state");
  std::vector<double> out;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (mask[i]) out.push_back(state[i]);
  if (out.empty()) throw std::invalid_argument("dimension mask removes every dimension");
  return out;
}

Trajectory apply_mask(const Trajectory& traj, const std::vector<bool>& mask) {
  if (mask.empty()) return traj;
  Trajectory out(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)));
  for (std::size_t p = 0; p < traj.size(); ++p) out.push_back(apply_mask(traj[p], mask));
  return out;
}

}  // namespace sigrec
