// sigrec command-line front end.
//
// Exit codes: 0 success, 1 input error, 2 validation violation.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigrec/dtw.hpp"
#include "sigrec/experiment.hpp"
#include "sigrec/recognizer.hpp"
#include "sigrec/sampler.hpp"
#include "sigrec/trajtree.hpp"

using namespace sigrec;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kViolation = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings shared by the subcommands. Precedence, lowest first: built-in
// defaults, SIGREC_MODE, command-line flags, --config file.
struct Settings {
  std::vector<double> merge{0.2};
  std::vector<double> prune{0.2};
  std::vector<std::size_t> k{5};
  std::size_t depth = 2;
  std::string mode = "plain";
  std::size_t radius = 1;
  std::string aggregation = "max";
  std::string reduction = "mean";
  std::uint64_t seed = 1;
  std::string format = "csv";
  std::vector<double> priors;
  std::vector<int> mask;
  std::optional<double> spread;
  std::optional<double> step;
  std::set<std::string> given;  // keys set by SIGREC_MODE, a flag or the config file
};

void apply_config(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw InputError("config file '" + path + "' must hold a JSON object");
  static const std::vector<std::string> known{"merge", "prune", "K", "depth", "mode", "radius", "aggregation",
                                              "dtw_reduction", "seed", "format", "priors", "mask", "spread", "step"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InputError("config file '" + path + "': unknown key '" + key + "'");
    s.given.insert(key);
  }

  const auto list = [&](const char* key, auto& out) {
    using T = typename std::decay_t<decltype(out)>::value_type;
    if (!j.contains(key)) return;
    out = j[key].is_array() ? j[key].get<std::vector<T>>() : std::vector<T>{j[key].get<T>()};
  };
  try {
    list("merge", s.merge);
    list("prune", s.prune);
    list("K", s.k);
    list("priors", s.priors);
    list("mask", s.mask);
    s.depth = j.value("depth", s.depth);
    s.mode = j.value("mode", s.mode);
    s.radius = j.value("radius", s.radius);
    s.aggregation = j.value("aggregation", s.aggregation);
    s.reduction = j.value("dtw_reduction", s.reduction);
    s.seed = j.value("seed", s.seed);
    s.format = j.value("format", s.format);
    if (j.contains("spread")) s.spread = j["spread"].get<double>();
    if (j.contains("step")) s.step = j["step"].get<double>();
  } catch (const json::exception& e) {
    throw InputError("config file '" + path + "': " + e.what());
  }
}

EngineConfig engine_config(const Settings& s) {
  EngineConfig c;
  c.depth = s.depth;
  c.mode = parse_scoring_mode(s.mode);
  c.dtw_radius = s.radius;
  c.aggregation = parse_aggregation(s.aggregation);
  c.dtw_reduction = parse_dtw_reduction(s.reduction);
  c.priors = s.priors;
  return c;
}

std::vector<bool> mask_of(const Settings& s) {
  std::vector<bool> m;
  for (int v : s.mask) m.push_back(v != 0);
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Observation files: "OBS <d>" then one "<t> <x_1> ... <x_d>" row per
// received observation, timesteps strictly increasing. '#' starts a comment.

std::vector<std::pair<long, std::vector<double>>> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open observation file '" + path + "'");
  std::vector<std::pair<long, std::vector<double>>> out;
  std::size_t dim = 0, line_no = 0;
  bool header = false;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    const auto fail = [&](const std::string& what) {
      throw InputError(path + ": line " + std::to_string(line_no) + ": " + what);
    };
    if (!header) {
      std::string tag;
      if (!(ls >> tag >> dim) || tag != "OBS" || dim == 0) fail("expected 'OBS <dimension>' header");
      header = true;
      continue;
    }
    long t = 0;
    if (!(ls >> t)) fail("missing timestep");
    std::vector<double> v(dim);
    for (auto& x : v)
      if (!(ls >> x)) fail("expected " + std::to_string(dim) + " values");
    std::string extra;
    if (ls >> extra) fail("trailing data '" + extra + "'");
    out.emplace_back(t, std::move(v));
  }
  if (!header) throw InputError(path + ": missing 'OBS <dimension>' header");
  return out;
}

// ---------------------------------------------------------------------------
// build-tree

int cmd_build_tree(const Settings& s, const std::string& traj_path, const std::string& out_path,
                   const std::string& report_path) {
  auto file = load_trajectories(traj_path);
  for (const auto& w : file.warnings) std::cerr << "warning: " << w << '\n';
  if (file.items.empty()) throw InputError("no trajectories in '" + traj_path + "'");
  if (!s.mask.empty())
    for (auto& item : file.items) item.trajectory = apply_mask(item.trajectory, mask_of(s));

  std::vector<GoalId> goals;
  for (const auto& item : file.items) goals.push_back(item.goal);
  std::sort(goals.begin(), goals.end());
  goals.erase(std::unique(goals.begin(), goals.end()), goals.end());

  const auto tree = compress(build_tree(file.items, s.depth), s.merge.front(), s.prune.front());
  const auto diag = validate(tree, goals);
  {
    auto out = open_out(out_path);
    write_tree(out, tree);
  }
  if (report_path.empty() || report_path == "-") {
    write_diagnostics(std::cout, diag);
  } else {
    auto rep = open_out(report_path);
    write_diagnostics(rep, diag);
  }
  return diag.ok() ? kOk : kViolation;
}

// ---------------------------------------------------------------------------
// recognize

void emit_step(std::ostream& os, const std::string& format, long t, const GoalPosterior& p, bool first) {
  if (format == "csv") {
    if (first) {
      os << "t";
      for (auto g : p.goals) os << ",goal_" << g;
      os << ",degenerate\n";
    }
    os << t;
    for (double v : p.probabilities) os << ',' << v;
    os << ',' << (p.degenerate ? 1 : 0) << '\n';
  } else {
    json j;
    j["t"] = t;
    json post = json::object();
    for (std::size_t i = 0; i < p.goals.size(); ++i) post[std::to_string(p.goals[i])] = p.probabilities[i];
    j["posterior"] = post;
    j["degenerate"] = p.degenerate;
    os << j.dump() << '\n';
  }
}

void emit_ranking(std::ostream& os, const std::string& format, const GoalPosterior& p) {
  std::vector<std::size_t> order(p.goals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p.probabilities[a] > p.probabilities[b]; });
  if (format == "csv") {
    os << "\nrank,goal,probability\n";
    for (std::size_t r = 0; r < order.size(); ++r)
      os << r + 1 << ',' << p.goals[order[r]] << ',' << p.probabilities[order[r]] << '\n';
  } else {
    json ranking = json::array();
    for (auto i : order) ranking.push_back({{"goal", p.goals[i]}, {"probability", p.probabilities[i]}});
    os << json{{"ranking", ranking}}.dump() << '\n';
  }
}

void dump_cost_matrices(const std::string& dir, long t, const RecognitionEngine& engine) {
  std::filesystem::create_directories(dir);
  const auto& obs = engine.log().prefix_signatures();
  const auto& branches = engine.branches();
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto costs = accumulated_costs(obs, branches[b].nodes);
    auto out = open_out((std::filesystem::path(dir) /
                         ("t" + std::to_string(t) + "_branch" + std::to_string(b) + ".csv")).string());
    write_cost_matrix_csv(out, costs);
  }
}

int cmd_recognize(Settings s, const std::string& tree_path, const std::string& obs_path,
                  const std::string& out_path, const std::string& dump_dir) {
  std::ifstream tin(tree_path);
  if (!tin) throw InputError("cannot open tree file '" + tree_path + "'");
  auto tree = std::make_shared<const TrajectoryTree>(read_tree(tin));
  auto observations = read_observations(obs_path);
  if (observations.empty()) throw InputError("no observations in '" + obs_path + "'");
  if (!s.mask.empty())
    for (auto& [t, o] : observations) o = apply_mask(o, mask_of(s));

  s.depth = tree->depth();
  auto problem = RecognitionProblem::from_tree(tree, engine_config(s));
  problem.config.validate(problem.goals.size());
  const auto diag = validate(*tree, tree->goal_ids());
  if (!diag.ok()) write_diagnostics(std::cerr, diag);

  RecognitionEngine engine(problem);
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") file = open_out(out_path);
  std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
  os.precision(std::numeric_limits<double>::max_digits10);

  bool first = true;
  for (const auto& [t, o] : observations) {
    if (engine.terminated()) {
      std::cerr << "note: goal state reached; ignoring observations from t = " << t << '\n';
      break;
    }
    const auto post = engine.observe(t, o);
    if (engine.terminated()) continue;
    if (!dump_dir.empty() && problem.config.mode == ScoringMode::dtw) dump_cost_matrices(dump_dir, t, engine);
    emit_step(os, s.format, t, post, first);
    first = false;
  }
  emit_ranking(os, s.format, engine.posterior());
  return diag.ok() ? kOk : kViolation;
}

// ---------------------------------------------------------------------------
// bench / grid-search

ExperimentSpec experiment_from(const Settings& s, const std::string& path) {
  auto spec = load_experiment(path);
  // The experiment file supplies defaults; anything set explicitly wins.
  const auto given = [&](const char* key) { return s.given.count(key) > 0; };
  if (given("merge")) spec.merge_thresholds = s.merge;
  if (given("prune")) spec.prune_thresholds = s.prune;
  if (given("K")) spec.k_values = s.k;
  if (given("seed")) spec.seed = s.seed;
  if (given("mode")) spec.modes = {parse_scoring_mode(s.mode)};
  if (given("depth")) spec.engine.depth = s.depth;
  if (given("radius")) spec.engine.dtw_radius = s.radius;
  if (given("aggregation")) spec.engine.aggregation = parse_aggregation(s.aggregation);
  if (given("dtw_reduction")) spec.engine.dtw_reduction = parse_dtw_reduction(s.reduction);
  if (s.spread) spec.spread = *s.spread;
  if (s.step) spec.step = *s.step;
  spec.validate();
  return spec;
}

ReportFormat report_format(const std::string& f) {
  if (f == "csv") return ReportFormat::csv;
  if (f == "jsonl") return ReportFormat::json_lines;
  if (f == "table") return ReportFormat::text_table;
  throw InputError("unknown output format '" + f + "'");
}

int cmd_bench(const ExperimentSpec& spec, const std::string& format, const std::string& out_path) {
  const auto report = run_experiment(spec);
  if (out_path.empty() || out_path == "-")
    emit_report(std::cout, report, report_format(format));
  else
    emit_report(out_path, report, report_format(format));
  if (report.threshold_violations > 0) {
    std::cerr << report.threshold_violations << " problem(s) produced a tree with fewer leaves than goals\n";
    return kViolation;
  }
  return kOk;
}

int cmd_grid_search(const ExperimentSpec& spec, const std::string& out_path) {
  const auto result = grid_search(spec);
  if (out_path.empty() || out_path == "-") {
    write_grid_csv(std::cout, result);
  } else {
    auto out = open_out(out_path);
    write_grid_csv(out, result);
  }
  const auto& best = result.cells.at(result.best);
  std::cerr << "best: merge " << best.settings.merge << " prune " << best.settings.prune << " K "
            << best.settings.k << " (PPV " << best.mean_ppv << ", ACC " << best.mean_acc << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal recognition over path-signature trajectory trees"};
  app.require_subcommand(1);

  Settings s;
  if (const char* env = std::getenv("SIGREC_MODE")) {
    s.mode = env;
    s.given.insert("mode");
  }
  std::string config_path;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file whose values override flags");
    sub->add_option("--depth", s.depth, "signature truncation depth (1..6)");
    sub->add_option("--seed", s.seed, "random seed");
    sub->add_option("--format", s.format, "output format")->check(CLI::IsMember({"csv", "jsonl", "table"}));
    sub->add_option("--mask", s.mask, "per-dimension mask, e.g. 1,1,0")->delimiter(',');
  };
  const auto thresholds = [&](CLI::App* sub) {
    sub->add_option("--merge", s.merge, "merge threshold(s), squared distance")->delimiter(',');
    sub->add_option("--prune", s.prune, "prune threshold(s), squared distance")->delimiter(',');
  };
  const auto engine = [&](CLI::App* sub) {
    sub->add_option("--mode", s.mode, "scoring mode (default from SIGREC_MODE)")
        ->check(CLI::IsMember({"plain", "dtw"}));
    sub->add_option("--radius", s.radius, "FastDTW radius");
    sub->add_option("--aggregation", s.aggregation, "per-goal aggregation")->check(CLI::IsMember({"max", "mean"}));
    sub->add_option("--reduction", s.reduction, "DTW distance reduction")->check(CLI::IsMember({"mean", "sum"}));
  };

  std::string traj_path, tree_out, report_path;
  auto* build = app.add_subcommand("build-tree", "build and compress a trajectory tree");
  common(build);
  thresholds(build);
  build->add_option("--trajectories,-i", traj_path, "trajectory file")->required();
  build->add_option("--out,-o", tree_out, "tree file to write")->required();
  build->add_option("--report", report_path, "validation report (default stdout)");

  std::string tree_path, obs_path, out_path, dump_dir;
  auto* recog = app.add_subcommand("recognize", "stream observations through a tree");
  common(recog);
  engine(recog);
  recog->add_option("--tree,-t", tree_path, "tree file")->required();
  recog->add_option("--observations,-i", obs_path, "observation file")->required();
  recog->add_option("--out,-o", out_path, "posterior output (default stdout)");
  recog->add_option("--priors", s.priors, "goal priors in goal order")->delimiter(',');
  recog->add_option("--dump-cost-matrix", dump_dir, "directory for per-step DTW cost matrices (dtw mode)");

  std::string exp_path;
  auto* bench = app.add_subcommand("bench", "run an experiment and report metrics");
  common(bench);
  thresholds(bench);
  engine(bench);
  bench->add_option("-K", s.k, "trajectories per goal");
  bench->add_option("--experiment,-e", exp_path, "experiment file")->required();
  bench->add_option("--out,-o", out_path, "report output (default stdout)");

  auto* grid = app.add_subcommand("grid-search", "sweep merge x prune x K");
  common(grid);
  thresholds(grid);
  engine(grid);
  grid->add_option("-K", s.k, "trajectories per goal")->delimiter(',');
  grid->add_option("--experiment,-e", exp_path, "experiment file")->required();
  grid->add_option("--out,-o", out_path, "grid CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  for (const auto* sub : app.get_subcommands())
    for (const auto* opt : sub->get_options())
      if (opt->count() > 0) {
        const std::string name = opt->get_name(false, true);
        s.given.insert(name == "--reduction" ? "dtw_reduction" : name.substr(name.find_first_not_of('-')));
      }

  try {
    if (!config_path.empty()) apply_config(s, config_path);
    if (s.merge.empty() || s.prune.empty() || s.k.empty()) throw InputError("empty threshold or K list");
    if (build->parsed()) return cmd_build_tree(s, traj_path, tree_out, report_path);
    if (recog->parsed()) {
      if (s.format == "table") throw InputError("recognize writes csv or jsonl");
      return cmd_recognize(s, tree_path, obs_path, out_path, dump_dir);
    }
    if (bench->parsed()) return cmd_bench(experiment_from(s, exp_path), s.format, out_path);
    if (grid->parsed()) return cmd_grid_search(experiment_from(s, exp_path), out_path);
  } catch (const SamplingError& e) {
    std::cerr << "error: " << e.what() << " (found " << e.found() << ")\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}
