#pragma once

// Bundled experiment configurations. Each carries the assertions that `verify`
// evaluates against a finished run.

#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace randpoly {

struct Preset
{
    std::string_view name;
    std::string_view summary;
    std::string_view text;
};

inline const std::vector<Preset>& presets()
{
    static const std::vector<Preset> all{
        {"minimal", "d=2 ball, one intensity, ten hulls", R"({
  "name": "minimal",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [100],
  "n_reps": 10,
  "functionals": ["intrinsic", "f_vector"],
  "seed": 1,
  "assertions": [
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"theorem1", "d=2 ball: variance rates of V_1, V_2, f_0 and the W1 trend of V_2", R"({
  "name": "theorem1",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [250, 500, 1000, 2000, 4000],
  "n_reps": 5000,
  "functionals": ["intrinsic", "f_vector", "wills"],
  "seed": 20240101,
  "assertions": [
    {"id": "slope_V_2", "kind": "rate_slope", "column": "V_2", "target": -1.6666666666666667, "tol": 0.15},
    {"id": "slope_V_1", "kind": "rate_slope", "column": "V_1", "target": -1.6666666666666667, "tol": 0.15},
    {"id": "slope_f_0", "kind": "rate_slope", "column": "f_0", "target": 0.3333333333333333, "tol": 0.15},
    {"id": "w1_trend_V_2", "kind": "w1_decreasing", "column": "V_2", "t_from": 250, "t_to": 4000},
    {"id": "w1_small_V_2", "kind": "w1_at_most", "column": "V_2", "t": 4000, "max": 0.05},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"theorem1-d3", "d=3 ball: variance rates of V_3 and f_0", R"({
  "name": "theorem1-d3",
  "body": {"kind": "ball", "dim": 3},
  "t_grid": [250, 500, 1000, 2000],
  "n_reps": 500,
  "functionals": ["intrinsic", "f_vector"],
  "seed": 20240102,
  "assertions": [
    {"id": "slope_V_3", "kind": "rate_slope", "column": "V_3", "target": -1.5, "tol": 0.2},
    {"id": "slope_f_0", "kind": "rate_slope", "column": "f_0", "target": 0.5, "tol": 0.2},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"oracle", "d=2 ball: unbiasedness and variance identity of the oracle estimator", R"({
  "name": "oracle",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [1000],
  "n_reps": 5000,
  "functionals": ["oracle"],
  "seed": 20240103,
  "assertions": [
    {"id": "unbiased", "kind": "mean_within", "column": "oracle", "t": 1000, "value": 3.141592653589793, "n_se": 4},
    {"id": "variance_identity", "kind": "variance_identity", "t": 1000, "lo": 0.9, "hi": 1.1},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"v0-law", "d=2 unit disk at t*area = 3: law of the Euler characteristic", R"({
  "name": "v0-law",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [0.954929658551372],
  "n_reps": 10000,
  "functionals": [{"intrinsic": 0}],
  "seed": 20240104,
  "assertions": [
    {"id": "mean_V_0", "kind": "mean_within", "column": "V_0", "t": 0.954929658551372, "value": 0.950212931632136, "n_se": 4},
    {"id": "variance_V_0", "kind": "variance_within", "column": "V_0", "t": 0.954929658551372, "value": 0.04730831619119759, "n_se": 4}
  ]
}
)"},
        {"multivariate", "d=2 ball: correlation signs and rank of (V_1, V_2, f_0, f_1)", R"({
  "name": "multivariate",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [1000],
  "n_reps": 5000,
  "functionals": ["multivariate"],
  "seed": 20240105,
  "assertions": [
    {"id": "fkg", "kind": "correlation_nonnegative", "t": 1000, "n_se": 3},
    {"id": "rank", "kind": "rank_at_most", "t": 1000, "max": 3, "tol": 1e-8},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"multivariate-d3", "d=3 ball: correlation signs of (V_1, V_2, V_3)", R"({
  "name": "multivariate-d3",
  "body": {"kind": "ball", "dim": 3},
  "t_grid": [1000],
  "n_reps": 5000,
  "functionals": ["multivariate"],
  "seed": 20240106,
  "assertions": [
    {"id": "fkg", "kind": "correlation_nonnegative", "t": 1000, "n_se": 3},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"malliavin", "d=2 ball at t=500: difference-operator bound against the empirical W1 of V_2", R"({
  "name": "malliavin",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [500],
  "n_reps": 5000,
  "functionals": [{"intrinsic": 2}],
  "seed": 20240107,
  "malliavin": {"t": 500, "functional": "V_2", "n_outer": 1000, "n_inner": 8, "sampling": "boundary_shell", "c": 2},
  "assertions": [
    {"id": "domination", "kind": "ms_domination", "n_se": 4},
    {"id": "euler", "kind": "euler_poincare"}
  ]
}
)"},
        {"sandwich", "d=2 ball: floating body containment for c=2", R"({
  "name": "sandwich",
  "body": {"kind": "ball", "dim": 2},
  "t_grid": [500, 1000, 2000],
  "n_reps": 20,
  "functionals": [{"intrinsic": 2}],
  "seed": 20240108,
  "sandwich": {"c": 2, "n_reps": 10000, "t_grid": [500, 1000, 2000]},
  "assertions": [
    {"id": "contained", "kind": "sandwich_at_least", "t": 1000, "min": 0.99},
    {"id": "monotone", "kind": "sandwich_nondecreasing"}
  ]
}
)"},
    };
    return all;
}

inline const Preset& find_preset(std::string_view name)
{
    for (const auto& p : presets()) {
        if (p.name == name) {
            return p;
        }
    }
    throw InputError("unknown preset '" + std::string(name) + "'");
}

} // namespace randpoly
