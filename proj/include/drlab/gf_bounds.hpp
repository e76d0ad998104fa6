#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "drlab/pmf.hpp"

namespace dr {

struct GfTracePoint {
    int n = 0;
    double s = 0.0;
    double g = 0.0;        // G_n(s) from the pmf iterate
    double g_deriv = 0.0;  // G_n'(s) from the pmf iterate
    double a = 0.0;        // G_n(s) - 1
    double g_zero = 0.0;   // G_n(0) = P(X_n = 0)
    double g_scalar = 0.0;        // scalar-recursion value
    double g_deriv_scalar = 0.0;  // scalar-recursion derivative
    bool crosscheck_ok = true;
};

struct GfTraceOptions {
    std::size_t support_cap = std::size_t{1} << 22;
    double crosscheck_rtol = 1e-9;
    ConvPolicy conv{.allow_fft = false};  // tails below the fft noise floor matter here
};

// Track (G_n(s), G_n'(s), a_n) two ways: from exact pmf iterates and through
// the scalar recursion G_{n+1}(s) = [h(G_n(s)) + (s-1) h(G_n(0))] / s seeded
// at n = 0, with G_n(0) read off the pmf. Runs untruncated.
std::vector<GfTracePoint> gf_trace(const ModelSpec& spec, double s, int n_max,
                                   const GfTraceOptions& opts = {});

struct ContractionCaps {
    double a_cap = 0.5;      // delta_0 analogue
    double gp_cap = 0.0;     // 0 -> use 1 / c0(a_cap) for the given offspring law
};

struct ContractionReport {
    bool ok = true;
    int checked_up_to = 0;   // largest n the inequality was asserted for
    int first_cap_exceed = -1;  // first n with a_n or G_n' at/above the caps, -1 if none
    double min_margin_ratio = std::numeric_limits<double>::infinity();  // min over n of rhs/lhs
    std::vector<int> violations;
};

// Assert G_n'(s) <= (m/s)^n G_0'(s) for 1 <= n < first cap crossing.
ContractionReport verify_contraction(const std::vector<GfTracePoint>& trace,
                                     const OffspringLaw& nu, const ContractionCaps& caps = {});

struct GfBoundResult {
    double p = 0.0;
    double s = 0.0;
    int n_sched = 0;      // scheduled horizon N
    double a_n = 0.0;     // a at the horizon
    double f_upper = 0.0; // log(1+a_N) / (m^N log s)
    bool established = false;
    std::string note;
};

struct GfBoundOptions {
    double a_cap = 0.5;
    std::size_t support_cap = std::size_t{1} << 22;
    ConvPolicy conv{.allow_fft = false};
};

// Free-energy upper bound along the critical-tail schedule s = m e^{-1/N},
// N = floor((c7 p)^{-1/(2+alpha)}). Needs spec.tail of kind critical.
GfBoundResult upper_bound_critical(const ModelSpec& spec, double c7, const GfBoundOptions& opts = {});

// Upper bound along the exponential-tail schedule s = e^{theta - eps},
// eps = 1/log(1/p), N' = floor(log(c9 eps^2 / p) / log(m/s)). Needs
// spec.tail of kind exponential with theta < log m.
GfBoundResult upper_bound_power_law(const ModelSpec& spec, double c9, const GfBoundOptions& opts = {});

// The schedule constants are knobs, not derived values: walk a doubling ladder
// from the given start until a run establishes, and return the first success
// (or the last attempt, not established).
GfBoundResult upper_bound_critical_scan(const ModelSpec& spec, double c7_start = 1.0,
                                        int ladder = 20, const GfBoundOptions& opts = {});
GfBoundResult upper_bound_power_law_scan(const ModelSpec& spec, double c9_start = 1.0,
                                         int ladder = 20, const GfBoundOptions& opts = {});

// CSV columns: p,s,N,a_N,F_upper,established
void write_gf_bound_csv(std::ostream& os, const std::vector<GfBoundResult>& rows);

}  // namespace dr
