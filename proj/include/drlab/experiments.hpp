#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drlab/pmf.hpp"
#include "drlab/recursion.hpp"
#include "drlab/tail_family.hpp"

namespace dr {

// Asymptotic exponent targets for the two tail regimes.
inline double beta_exponent(double theta, double m) {
    return std::log(m) / (std::log(m) - theta);
}
inline double chi_exponent(double alpha) { return 1.0 / (alpha + 2.0); }

struct FitPoint {
    double p = 0.0;
    double f_low = 0.0, f_high = 0.0, f_mid = 0.0;
    double rel_width = 0.0;
    int n_used = 0;
    bool admissible = false;
};

struct FitReport {
    std::string kind;  // "beta", "chi", "conjecture"
    std::vector<FitPoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    double target = 0.0;
    double tol = 0.0;
    bool pass = false;
    // chi only: min over the grid of p^chi * log(1/F_upper).
    std::optional<double> refinement_min;
    std::optional<bool> refinement_pass;
    bool partial = false;
    std::string note;

    nlohmann::json to_json() const;
};

struct FitOptions {
    std::optional<OffspringLaw> nu;  // default: deterministic round(m)
    int k_max = 0;                   // 0 -> auto from the remainder rule
    double rel_width_gate = 0.15;    // admissibility threshold on F intervals
    double budget = 0.0;             // untruncated; see FreeEnergyOptions
    int n_cap = 400;
    std::size_t support_cap = std::size_t{1} << 22;
    unsigned threads = 1;
    double refinement_floor = 0.05;  // chi one-sided check
};

// Slope of log F vs log p against beta(theta) = log m / (log m - theta).
FitReport fit_beta(double theta, double m, std::span<const double> p_grid, double tol,
                   const FitOptions& opts = {});

// Slope of log log(1/F) vs log(1/p) against chi(alpha) = 1/(alpha + 2).
FitReport fit_chi(double alpha, double m, std::span<const double> p_grid, double tol,
                  const FitOptions& opts = {});

struct ConjectureScanOptions {
    int points = 8;
    double rel_width_gate = 0.25;
    double budget = 0.0;
    int n_cap = 2000;
    std::size_t support_cap = std::size_t{1} << 22;
    unsigned threads = 1;
    double max_above = 0.3;  // window must stay within p_c + max_above
};

// Exploratory only: fit log(1/F) against (p - p_c)^{-1/2} above the critical
// point. Never a pass/fail gate; the report says so.
FitReport conjecture_scan(const LatticePmf& y0, const OffspringLaw& nu, double p_c, double p_lo,
                          double p_hi, const ConjectureScanOptions& opts = {});

struct MaxLeafRow {
    double b = 0.0;
    double exact_gt = 0.0;  // P(X_n > b) from the pmf engine
    double mc = 0.0;        // P(max leaf - n > b) sampled on trees
    double se = 0.0;
    bool ok = false;  // exact_gt >= mc - 3 se
};

struct MaxLeafReport {
    int n = 0;
    std::vector<MaxLeafRow> rows;
    bool all_ok = true;

    nlohmann::json to_json() const;
};

MaxLeafReport max_leaf_lower_bound_check(const ModelSpec& spec, int n,
                                         std::span<const double> b_grid, int trials,
                                         std::uint64_t seed);

void write_fit_csv(std::ostream& os, const FitReport& report);

// Geometric grid p = start * ratio^i, i = 0..count-1.
std::vector<double> geometric_grid(double start, double ratio, int count);

}  // namespace dr
