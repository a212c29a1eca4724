#pragma once

#include <string>

// Inline copies of the shipped spec documents so unit tests do not depend on
// filesystem layout.
namespace fixtures {

inline std::string double_well(double c) {
  std::string ell;
  if (c == 0.0) {
    ell = R"("ell": {"kind": "zero"},)";
  } else {
    const std::string cs = std::to_string(c);
    ell = R"("ell": {"kind": "skew_poly", "J": [[[0.0, )" + cs + R"(], [-)" + cs +
          R"(, 0.0]]]},)";
  }
  return R"({
  "dimension": 2,
  "potential": {"terms": [
    {"coeff": 1.0, "powers": [4, 0]},
    {"coeff": -2.0, "powers": [2, 0]},
    {"coeff": 1.0, "powers": [0, 0]},
    {"coeff": 1.0, "powers": [0, 2]}
  ]},
)" + ell + R"(
  "domain": {"lower": [-2.0, -2.0], "upper": [2.0, 2.0]},
  "level_H": 1.0,
  "epsilons": [0.1, 0.05, 0.025],
  "r0": 0.45,
  "seed": 7
})";
}

inline std::string triple_well() {
  return R"({
  "dimension": 2,
  "potential": {"terms": [
    {"coeff": 8.0, "powers": [6, 0]},
    {"coeff": -15.0, "powers": [4, 0]},
    {"coeff": 6.0, "powers": [2, 0]},
    {"coeff": 1.0, "powers": [0, 2]}
  ]},
  "ell": {"kind": "skew_poly", "J": [[[0.0, 1.0], [-1.0, 0.0]]]},
  "domain": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]},
  "level_H": 0.6875,
  "epsilons": [0.08],
  "r0": 0.08,
  "seed": 11
})";
}

inline std::string quadratic_bowl() {
  return R"({
  "dimension": 2,
  "potential": {"terms": [
    {"coeff": 1.0, "powers": [2, 0]},
    {"coeff": 1.0, "powers": [0, 2]}
  ]},
  "ell": {"kind": "zero"},
  "domain": {"lower": [-2.0, -2.0], "upper": [2.0, 2.0]},
  "level_H": 1.0,
  "epsilons": [0.1],
  "r0": 0.2,
  "seed": 1
})";
}

}  // namespace fixtures
