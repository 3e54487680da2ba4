#include "sigrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace sigrec {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double half_width_95(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  return 1.96 * stddev_of(v) / std::sqrt(static_cast<double>(v.size()));
}

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::size_t cut_length(double fraction, std::size_t n) {
  const double raw = fraction * static_cast<double>(n);
  const auto cut = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(cut, 1, n);
}

// Runs `body(i)` for i in [0, n), on an OpenMP pool when `parallel` is set.
// The first exception (by index) is rethrown after the loop.
template <typename Body>
void for_each_index(std::size_t n, bool parallel, Body body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (parallel && count > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<LabeledTrajectory> sample_all_goals(const ProblemSpec& problem, const ExperimentSpec& spec,
                                                std::size_t k) {
  std::vector<LabeledTrajectory> out;
  for (std::size_t g = 0; g < problem.goals.size(); ++g) {
    SampleRequest req;
    req.start = problem.start;
    req.goal = problem.goals[g];
    req.k = k;
    req.seed = spec.seed * 1000003ULL + g;
    req.spread = spec.spread;
    req.step = spec.step;
    SampleResult res;
    try {
      res = sample_k_trajectories(problem.map, req);
    } catch (const SamplingError& e) {
      if (e.found() == 0) throw;
      res = e.partial();
    }
    for (auto& t : res.trajectories) out.push_back({std::move(t), static_cast<GoalId>(g)});
  }
  return out;
}

Trajectory observed_trajectory(const ProblemSpec& problem, const ExperimentSpec& spec) {
  if (problem.observations) return *problem.observations;
  SampleRequest req;
  req.start = problem.start;
  req.goal = problem.goals.at(problem.true_goal);
  req.k = 2;
  req.seed = spec.seed * 7919ULL + 0x5eedULL + std::hash<std::string>{}(problem.name) % 1000;
  req.spread = spec.spread;
  req.step = spec.step;
  try {
    auto res = sample_k_trajectories(problem.map, req);
    return std::move(res.trajectories.back());
  } catch (const SamplingError& e) {
    if (e.found() == 0) throw;
    return e.partial().trajectories.back();
  }
}

std::string settings_label(const RunSettings& run) {
  std::ostringstream os;
  os << to_string(run.mode) << " merge=" << run.merge << " prune=" << run.prune << " K=" << run.k;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

void ExperimentSpec::validate() const {
  if (problems.empty()) throw std::invalid_argument("experiment has no problems");
  if (fractions.empty()) throw std::invalid_argument("experiment has no observation fractions");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("observation fractions must lie in (0, 1]");
  if (merge_thresholds.empty() || prune_thresholds.empty() || k_values.empty() || modes.empty())
    throw std::invalid_argument("experiment grids must be nonempty");
  for (auto k : k_values)
    if (k == 0) throw std::invalid_argument("K values must be positive");
  for (const auto& p : problems) {
    if (p.goals.empty()) throw std::invalid_argument("problem '" + p.name + "' has no goals");
    if (p.true_goal >= p.goals.size())
      throw std::invalid_argument("problem '" + p.name + "' has no ground-truth goal");
    if (p.observations && p.observations->empty())
      throw std::invalid_argument("problem '" + p.name + "' has an empty observation source");
  }
  engine.validate(problems.front().goals.size());
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment file '" + path + "'");
  const json j = json::parse(in);
  const auto base = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& p) { return (base / p).string(); };

  ExperimentSpec spec;
  spec.seed = j.value("seed", spec.seed);
  spec.spread = j.value("spread", spec.spread);
  spec.step = j.value("step", spec.step);
  spec.parallel = j.value("parallel", spec.parallel);
  if (j.contains("fractions")) spec.fractions = j["fractions"].get<std::vector<double>>();
  if (j.contains("merge")) spec.merge_thresholds = j["merge"].get<std::vector<double>>();
  if (j.contains("prune")) spec.prune_thresholds = j["prune"].get<std::vector<double>>();
  if (j.contains("K")) spec.k_values = j["K"].get<std::vector<std::size_t>>();
  if (j.contains("modes")) {
    spec.modes.clear();
    for (const auto& m : j["modes"]) spec.modes.push_back(parse_scoring_mode(m.get<std::string>()));
  }
  spec.engine.depth = j.value("depth", spec.engine.depth);
  spec.engine.dtw_radius = j.value("dtw_radius", spec.engine.dtw_radius);
  if (j.contains("aggregation")) spec.engine.aggregation = parse_aggregation(j["aggregation"].get<std::string>());
  if (j.contains("dtw_reduction"))
    spec.engine.dtw_reduction = parse_dtw_reduction(j["dtw_reduction"].get<std::string>());
  spec.engine.tie_tolerance = j.value("tie_tolerance", spec.engine.tie_tolerance);

  for (const auto& pj : j.at("problems")) {
    ProblemSpec p;
    p.name = pj.value("name", "problem" + std::to_string(spec.problems.size()));
    if (pj.contains("map")) {
      std::ifstream mf(resolve(pj["map"].get<std::string>()));
      if (!mf) throw std::runtime_error("cannot open map for problem '" + p.name + "'");
      p.map = read_movingai_map(mf);
    } else {
      const auto size = pj.at("grid").get<std::vector<int>>();
      if (size.size() != 2) throw std::runtime_error("'grid' must be [width, height]");
      p.map = GridMap(size[0], size[1]);
    }
    if (pj.contains("blocked"))
      for (const auto& c : pj["blocked"]) p.map.set_blocked({c.at(0).get<int>(), c.at(1).get<int>()});
    const auto s = pj.at("start").get<std::vector<int>>();
    p.start = {s.at(0), s.at(1)};
    for (const auto& g : pj.at("goals")) p.goals.push_back({g.at(0).get<int>(), g.at(1).get<int>()});
    p.true_goal = pj.at("true_goal").get<std::size_t>();
    if (pj.contains("observations")) {
      auto file = load_trajectories(resolve(pj["observations"].get<std::string>()));
      if (file.items.empty()) throw std::runtime_error("problem '" + p.name + "' has an empty observation file");
      p.observations = std::move(file.items.front().trajectory);
    }
    spec.problems.push_back(std::move(p));
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Metrics

MetricsReport compute_metrics(std::span<const ProblemOutcome> outcomes) {
  MetricsReport r;
  r.problems = outcomes.size();
  if (outcomes.empty()) return r;

  const std::size_t n_fr = outcomes.front().fractions.size();
  struct Tally {
    std::size_t tp = 0, fp = 0, correct = 0, cuts = 0, spread = 0;
    std::vector<double> ppv_by_problem, acc_by_problem;
  };
  std::vector<Tally> by_fraction(n_fr);
  std::size_t correct = 0, cuts = 0, spread = 0;
  std::vector<double> online, offline, ppv_by_problem, acc_by_problem;
  double pc = 0.0;

  for (const auto& o : outcomes) {
    if (o.fractions.size() != n_fr) throw std::invalid_argument("outcomes disagree on the fraction list");
    std::size_t tp = 0, fp = 0, ok = 0;
    for (std::size_t f = 0; f < n_fr; ++f) {
      const auto& fo = o.fractions[f];
      std::size_t ftp = 0, ffp = 0;
      for (auto pred : fo.step_argmax) (pred == o.true_goal ? ftp : ffp) += 1;
      const bool hit = fo.final_argmax == o.true_goal;
      auto& t = by_fraction[f];
      t.tp += ftp;
      t.fp += ffp;
      t.correct += hit;
      t.cuts += 1;
      t.spread += fo.final_predicted.size();
      t.ppv_by_problem.push_back(percent(ftp, ftp + ffp));
      t.acc_by_problem.push_back(hit ? 100.0 : 0.0);
      tp += ftp;
      fp += ffp;
      ok += hit;
      spread += fo.final_predicted.size();
    }
    r.true_positives += tp;
    r.false_positives += fp;
    correct += ok;
    cuts += n_fr;
    ppv_by_problem.push_back(percent(tp, tp + fp));
    acc_by_problem.push_back(percent(ok, n_fr));
    online.push_back(o.online_seconds);
    offline.push_back(o.offline_seconds);
    pc += static_cast<double>(o.planner_calls);
    r.threshold_violations += o.threshold_violation;
  }

  r.ppv = percent(r.true_positives, r.true_positives + r.false_positives);
  r.acc = percent(correct, cuts);
  r.spr = cuts ? static_cast<double>(spread) / static_cast<double>(cuts) : 0.0;
  r.pc = pc / static_cast<double>(outcomes.size());
  r.online_mean = mean_of(online);
  r.online_std = stddev_of(online);
  r.offline_mean = mean_of(offline);
  r.offline_std = stddev_of(offline);
  r.ppv_half_width = half_width_95(ppv_by_problem);
  r.acc_half_width = half_width_95(acc_by_problem);
  for (std::size_t f = 0; f < n_fr; ++f) {
    const auto& t = by_fraction[f];
    FractionMetrics fm;
    fm.fraction = outcomes.front().fractions[f].fraction;
    fm.ppv = percent(t.tp, t.tp + t.fp);
    fm.acc = percent(t.correct, t.cuts);
    fm.spr = t.cuts ? static_cast<double>(t.spread) / static_cast<double>(t.cuts) : 0.0;
    fm.ppv_half_width = half_width_95(t.ppv_by_problem);
    fm.acc_half_width = half_width_95(t.acc_by_problem);
    r.per_fraction.push_back(fm);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Runs

ProblemOutcome run_problem_with(const ProblemSpec& problem, const ExperimentSpec& spec, const RunSettings& run,
                                std::span<const LabeledTrajectory> sampled, double sampling_seconds,
                                std::size_t planner_calls) {
  ProblemOutcome out;
  out.name = problem.name;
  out.true_goal = problem.true_goal;
  out.goal_count = problem.goals.size();
  out.planner_calls = planner_calls;

  const auto t_build = Clock::now();
  auto tree = std::make_shared<const TrajectoryTree>(
      compress(build_tree(sampled, spec.engine.depth, false), run.merge, run.prune));
  out.offline_seconds = sampling_seconds + seconds_since(t_build);

  std::vector<GoalId> ids(problem.goals.size());
  std::iota(ids.begin(), ids.end(), 0);
  out.threshold_violation = !validate(*tree, ids).ok();

  RecognitionProblem rp;
  for (std::size_t g = 0; g < problem.goals.size(); ++g)
    rp.goals.push_back({static_cast<GoalId>(g), {double(problem.goals[g].x), double(problem.goals[g].y)}});
  rp.initial_state = {double(problem.start.x), double(problem.start.y)};
  rp.tree = tree;
  rp.config = spec.engine;
  rp.config.mode = run.mode;
  rp.config.parallel = false;  // problems already run in parallel

  const Trajectory obs = observed_trajectory(problem, spec);
  std::vector<std::size_t> cuts;
  for (double f : spec.fractions) cuts.push_back(cut_length(f, obs.size()));
  const std::size_t horizon = *std::max_element(cuts.begin(), cuts.end());

  RecognitionEngine engine(rp);
  std::vector<GoalPosterior> history;
  history.reserve(horizon);
  const auto t_online = Clock::now();
  for (std::size_t t = 0; t < horizon; ++t) {
    if (!engine.terminated()) engine.observe(static_cast<long>(t), obs[t]);
    history.push_back(engine.posterior());
  }
  out.online_seconds = seconds_since(t_online);

  for (std::size_t f = 0; f < spec.fractions.size(); ++f) {
    FractionOutcome fo;
    fo.fraction = spec.fractions[f];
    for (std::size_t t = 0; t < cuts[f]; ++t) fo.step_argmax.push_back(history[t].argmax());
    const auto& last = history[cuts[f] - 1];
    fo.final_argmax = last.argmax();
    fo.final_predicted = last.predicted(spec.engine.tie_tolerance);
    out.fractions.push_back(std::move(fo));
  }
  return out;
}

ProblemOutcome run_problem(const ProblemSpec& problem, const ExperimentSpec& spec, const RunSettings& run) {
  const auto t0 = Clock::now();
  const auto sampled = sample_all_goals(problem, spec, run.k);
  return run_problem_with(problem, spec, run, sampled, seconds_since(t0), problem.goals.size());
}

MetricsReport run_experiment(const ExperimentSpec& spec, const RunSettings& run) {
  spec.validate();
  std::vector<ProblemOutcome> outcomes(spec.problems.size());
  for_each_index(spec.problems.size(), spec.parallel,
                 [&](std::size_t i) { outcomes[i] = run_problem(spec.problems[i], spec, run); });
  MetricsReport r = compute_metrics(outcomes);
  r.label = settings_label(run);
  return r;
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_experiment(spec, RunSettings{spec.merge_thresholds.front(), spec.prune_thresholds.front(),
                                          spec.k_values.front(), spec.modes.front()});
}

GridSearchResult grid_search(const ExperimentSpec& spec) {
  spec.validate();
  GridSearchResult result;
  const std::size_t np = spec.problems.size();
  for (std::size_t k : spec.k_values) {
    std::vector<std::vector<LabeledTrajectory>> samples(np);
    std::vector<double> sample_seconds(np);
    for_each_index(np, spec.parallel, [&](std::size_t i) {
      const auto t0 = Clock::now();
      samples[i] = sample_all_goals(spec.problems[i], spec, k);
      sample_seconds[i] = seconds_since(t0);
    });
    for (double merge_eps : spec.merge_thresholds) {
      for (double prune_eps : spec.prune_thresholds) {
        const RunSettings run{merge_eps, prune_eps, k, spec.modes.front()};
        std::vector<ProblemOutcome> outcomes(np);
        for_each_index(np, spec.parallel, [&](std::size_t i) {
          outcomes[i] = run_problem_with(spec.problems[i], spec, run, samples[i], sample_seconds[i],
                                         spec.problems[i].goals.size());
        });
        const MetricsReport r = compute_metrics(outcomes);
        result.cells.push_back({run, r.ppv, r.acc, r.threshold_violations});
      }
    }
  }
  const auto better = [](const GridCell& a, const GridCell& b) {
    if (a.mean_ppv != b.mean_ppv) return a.mean_ppv > b.mean_ppv;
    if (a.settings.prune != b.settings.prune) return a.settings.prune < b.settings.prune;
    if (a.settings.merge != b.settings.merge) return a.settings.merge < b.settings.merge;
    return a.settings.k < b.settings.k;
  };
  for (std::size_t i = 1; i < result.cells.size(); ++i)
    if (better(result.cells[i], result.cells[result.best])) result.best = i;
  return result;
}

void write_grid_csv(std::ostream& os, const GridSearchResult& result) {
  os << "mode,K,merge,prune,ppv,acc,violations,best\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    os << to_string(c.settings.mode) << ',' << c.settings.k << ',' << c.settings.merge << ',' << c.settings.prune
       << ',' << c.mean_ppv << ',' << c.mean_acc << ',' << c.threshold_violations << ','
       << (i == result.best ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "jsonl" || s == "json" || s == "json-lines") return ReportFormat::json_lines;
  if (s == "text" || s == "table") return ReportFormat::text_table;
  throw std::invalid_argument("unknown report format '" + s + "' (expected csv, jsonl or text)");
}

namespace {

json to_json(const MetricsReport& r) {
  json j;
  j["label"] = r.label;
  j["problems"] = r.problems;
  j["ppv"] = r.ppv;
  j["acc"] = r.acc;
  j["spr"] = r.spr;
  j["pc"] = r.pc;
  j["online_mean"] = r.online_mean;
  j["online_std"] = r.online_std;
  j["offline_mean"] = r.offline_mean;
  j["offline_std"] = r.offline_std;
  j["ppv_hw"] = r.ppv_half_width;
  j["acc_hw"] = r.acc_half_width;
  j["tp"] = r.true_positives;
  j["fp"] = r.false_positives;
  j["violations"] = r.threshold_violations;
  j["per_fraction"] = json::array();
  for (const auto& f : r.per_fraction)
    j["per_fraction"].push_back({{"fraction", f.fraction},
                                 {"ppv", f.ppv},
                                 {"acc", f.acc},
                                 {"spr", f.spr},
                                 {"ppv_hw", f.ppv_half_width},
                                 {"acc_hw", f.acc_half_width}});
  return j;
}

}  // namespace

MetricsReport report_from_json(const std::string& line) {
  const json j = json::parse(line);
  MetricsReport r;
  r.label = j.at("label").get<std::string>();
  r.problems = j.at("problems").get<std::size_t>();
  r.ppv = j.at("ppv").get<double>();
  r.acc = j.at("acc").get<double>();
  r.spr = j.at("spr").get<double>();
  r.pc = j.at("pc").get<double>();
  r.online_mean = j.at("online_mean").get<double>();
  r.online_std = j.at("online_std").get<double>();
  r.offline_mean = j.at("offline_mean").get<double>();
  r.offline_std = j.at("offline_std").get<double>();
  r.ppv_half_width = j.at("ppv_hw").get<double>();
  r.acc_half_width = j.at("acc_hw").get<double>();
  r.true_positives = j.at("tp").get<std::size_t>();
  r.false_positives = j.at("fp").get<std::size_t>();
  r.threshold_violations = j.at("violations").get<std::size_t>();
  for (const auto& f : j.at("per_fraction"))
    r.per_fraction.push_back({f.at("fraction").get<double>(), f.at("ppv").get<double>(), f.at("acc").get<double>(),
                              f.at("spr").get<double>(), f.at("ppv_hw").get<double>(), f.at("acc_hw").get<double>()});
  return r;
}

void emit_report(std::ostream& os, const MetricsReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::csv: {
      const auto old = os.precision(std::numeric_limits<double>::max_digits10);
      os << "label,problems,ppv,acc,spr,pc,online_mean,online_std,offline_mean,offline_std,ppv_hw,acc_hw,tp,fp,"
            "violations\n";
      os << '"' << r.label << "\"," << r.problems << ',' << r.ppv << ',' << r.acc << ',' << r.spr << ',' << r.pc
         << ',' << r.online_mean << ',' << r.online_std << ',' << r.offline_mean << ',' << r.offline_std << ','
         << r.ppv_half_width << ',' << r.acc_half_width << ',' << r.true_positives << ',' << r.false_positives
         << ',' << r.threshold_violations << '\n';
      os.precision(old);
      break;
    }
    case ReportFormat::json_lines:
      os << to_json(r).dump() << '\n';
      break;
    case ReportFormat::text_table: {
      const auto pm = [](double m, double s) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(1) << m << " ± " << s;
        return c.str();
      };
      const auto sci = [](double m, double s) {
        std::ostringstream c;
        c << std::scientific << std::setprecision(1) << m << " ± " << s;
        return c.str();
      };
      os << r.label << "  (" << r.problems << " problems)\n";
      os << std::left << std::setw(16) << "PPV (%)" << std::setw(16) << "ACC (%)" << std::setw(8) << "SPR"
         << std::setw(8) << "PC" << std::setw(22) << "Online (s)" << "Offline (s)\n";
      os << std::setw(16) << pm(r.ppv, r.ppv_half_width) << std::setw(16) << pm(r.acc, r.acc_half_width)
         << std::setw(8) << std::fixed << std::setprecision(1) << r.spr << std::setw(8) << r.pc << std::setw(22)
         << sci(r.online_mean, r.online_std) << sci(r.offline_mean, r.offline_std) << '\n';
      if (!r.per_fraction.empty()) {
        os << '\n' << std::setw(10) << "fraction" << std::setw(16) << "PPV (%)" << std::setw(16) << "ACC (%)"
           << "SPR\n";
        for (const auto& f : r.per_fraction)
          os << std::setw(10) << std::setprecision(3) << f.fraction << std::setw(16) << pm(f.ppv, f.ppv_half_width)
             << std::setw(16) << pm(f.acc, f.acc_half_width) << std::setprecision(2) << f.spr << '\n';
      }
      if (r.threshold_violations)
        os << "\nwarning: " << r.threshold_violations << " problem(s) violated the leaf-count threshold\n";
      os << std::right << std::defaultfloat;
      break;
    }
  }
}

void emit_report(const std::string& path, const MetricsReport& report, ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  emit_report(out, report, format);
  if (!out) throw std::runtime_error("failed while writing report to '" + path + "'");
}

}  // namespace sigrec
