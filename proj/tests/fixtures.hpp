#pragma once

// Hand-built outcomes shared by the unit tests and the acceptance binary.

#include <vector>

#include "sigrec/experiment.hpp"

namespace fixture {

inline sigrec::FractionOutcome cut(double f, std::vector<std::size_t> steps, std::size_t final_argmax,
                                   std::vector<std::size_t> predicted) {
  return {f, std::move(steps), std::move(predicted), final_argmax};
}

inline sigrec::ProblemOutcome problem(const char* name, std::size_t truth, std::vector<sigrec::FractionOutcome> cuts) {
  sigrec::ProblemOutcome o;
  o.name = name;
  o.true_goal = truth;
  o.goal_count = 3;
  o.planner_calls = 3;
  o.fractions = std::move(cuts);
  return o;
}

// Four problems, three goals each, cuts at 1/2 and 1.
//
//            truth  cut 1/2: steps  final  tied   cut 1: steps  final  tied
//   p0       0      0 0             0      {0}    0 0 0 0       0      {0}
//   p1       1      0 1             1      {1,2}  0 1 1 1       1      {1}
//   p2       2      0 0             0      {0}    0 0 2 2       2      {2}
//   p3       0      1 1             1      {1}    1 1 1 2       2      {2}
//
// By hand: TP 12, FP 12, PPV 50%; ACC 5/8 = 62.5%; SPR 9/8; PC 3.
// Cut 1/2: TP 3 FP 5 -> 37.5%, ACC 50%, SPR 1.25.
// Cut 1:   TP 9 FP 7 -> 56.25%, ACC 75%, SPR 1.
inline std::vector<sigrec::ProblemOutcome> four_problems() {
  return {
      problem("p0", 0, {cut(0.5, {0, 0}, 0, {0}), cut(1.0, {0, 0, 0, 0}, 0, {0})}),
      problem("p1", 1, {cut(0.5, {0, 1}, 1, {1, 2}), cut(1.0, {0, 1, 1, 1}, 1, {1})}),
      problem("p2", 2, {cut(0.5, {0, 0}, 0, {0}), cut(1.0, {0, 0, 2, 2}, 2, {2})}),
      problem("p3", 0, {cut(0.5, {1, 1}, 1, {1}), cut(1.0, {1, 1, 1, 2}, 2, {2})}),
  };
}

}  // namespace fixture
