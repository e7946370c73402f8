#pragma once

// Scalar and vector functionals of a polytope: intrinsic volumes, Hadwiger
// valuations, the Wills functional, f-vector components and the oracle volume
// estimator.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "hull.hpp"
#include "intrinsic.hpp"
#include "rng.hpp"

namespace randpoly {

/// How V_1..V_{d-1} are evaluated: closed form (d <= 3) or Kubota Monte Carlo.
struct EvalMode
{
    bool monte_carlo = false;
    int n_dirs = 4096;

    static EvalMode exact() { return {}; }
    static EvalMode mc(int n_dirs = 4096) { return {true, n_dirs}; }

    friend bool operator==(const EvalMode&, const EvalMode&) = default;
};

/// Coefficients (c_0, ..., c_d) of phi = sum_i c_i V_i.
struct ValuationSpec
{
    std::vector<double> coeffs;
    std::string label;

    static ValuationSpec wills(int d) { return {std::vector<double>(static_cast<std::size_t>(d + 1), 1.0), "wills"}; }

    static ValuationSpec intrinsic(int d, int j)
    {
        std::vector<double> c(static_cast<std::size_t>(d + 1), 0.0);
        c[static_cast<std::size_t>(j)] = 1.0;
        return {std::move(c), "V_" + std::to_string(j)};
    }

    /// Coefficients share a sign (c_i c_j >= 0) and some c_k, k >= 1, is nonzero:
    /// the condition under which the valuation of K_t is asymptotically normal.
    [[nodiscard]] bool satisfies_clt_gate() const
    {
        bool has_positive = false;
        bool has_negative = false;
        bool nonzero_above_zero = false;
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            has_positive = has_positive || coeffs[i] > 0.0;
            has_negative = has_negative || coeffs[i] < 0.0;
            if (i >= 1 && coeffs[i] != 0.0) {
                nonzero_above_zero = true;
            }
        }
        return !(has_positive && has_negative) && nonzero_above_zero;
    }
};

/// V_0: 1 for a nonempty polytope, else 0.
inline double euler_indicator(const Polytope& poly)
{
    return poly.empty() ? 0.0 : 1.0;
}

/// (V_0, ..., V_d). Exact mode requires d <= 3; mc mode draws from rng.
inline std::vector<double> intrinsic_volumes(const Polytope& poly, const EvalMode& mode, Philox* rng = nullptr)
{
    if (!mode.monte_carlo) {
        return exact_intrinsic_volumes(poly);
    }
    require(mode.n_dirs >= 2, "mc mode requires n_dirs >= 2");
    require(rng != nullptr, "mc mode requires a random generator");
    const int d = poly.dim();
    std::vector<double> v(static_cast<std::size_t>(d + 1), 0.0);
    v[0] = euler_indicator(poly);
    for (int j = 1; j <= d; ++j) {
        v[static_cast<std::size_t>(j)] = intrinsic_volume_mc(poly, j, mode.n_dirs, *rng).estimate;
    }
    return v;
}

/// sum_i c_i V_i for precomputed intrinsic volumes.
inline double valuation_from(const std::vector<double>& volumes, const ValuationSpec& spec)
{
    require(spec.coeffs.size() == volumes.size(), "valuation spec length must be d + 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        sum += spec.coeffs[i] * volumes[i];
    }
    return sum;
}

inline double valuation(const Polytope& poly, const ValuationSpec& spec, const EvalMode& mode = EvalMode::exact(),
                        Philox* rng = nullptr)
{
    require(static_cast<int>(spec.coeffs.size()) == poly.dim() + 1, "valuation spec length must be d + 1");
    require(!mode.monte_carlo || mode.n_dirs >= 2, "mc mode requires n_dirs >= 2");
    return valuation_from(intrinsic_volumes(poly, mode, rng), spec);
}

inline double wills(const Polytope& poly, const EvalMode& mode = EvalMode::exact(), Philox* rng = nullptr)
{
    return valuation(poly, ValuationSpec::wills(poly.dim()), mode, rng);
}

/// V_d(K_t) + f_0(K_t) / t, unbiased for V_d(K) when K_t is the hull of a Poisson
/// process of intensity t.
inline double oracle_estimate(const Polytope& poly, double t)
{
    require(t > 0.0 && std::isfinite(t), "intensity t must be positive");
    if (poly.empty()) {
        return 0.0;
    }
    return poly.volume() + static_cast<double>(f_vector(poly)[0]) / t;
}

/// (V_1, ..., V_d, f_0, ..., f_{d-1}) before standardization.
inline std::vector<double> multivariate_raw(const Polytope& poly, const EvalMode& mode = EvalMode::exact(),
                                            Philox* rng = nullptr)
{
    const int d = poly.dim();
    const std::vector<double> v = intrinsic_volumes(poly, mode, rng);
    const FVector f = f_vector(poly);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * d));
    out.insert(out.end(), v.begin() + 1, v.end());
    for (long count : f.counts) {
        out.push_back(static_cast<double>(count));
    }
    return out;
}

} // namespace randpoly
