#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drlab/pmf.hpp"

namespace dr {

struct GfSample {
    double s = 0.0;
    double g = 0.0;
    double g_deriv = 0.0;
};

struct TraceRow {
    int n = 0;
    double mean_low = 0.0;   // kept-mass mean, certified lower bound
    double mean_high = 0.0;  // mean_low + dropped_mean_bound
    double zero_mass = 0.0;
    std::size_t support = 0;
    double dropped = 0.0;
    double f_low_raw = 0.0;  // (mean_low - 1/(m-1)) / m^n, may be negative
    double f_high = 0.0;     // mean_high / m^n
    double trunc_width = 0.0;  // dropped_mean_bound / m^n
    std::vector<GfSample> gf;
};

struct IterationTrace {
    double m = 0.0;
    std::vector<TraceRow> rows;  // generations 0..n
};

enum class StopReason { completed, support_cap };

struct IterateOptions {
    int n_max = 0;
    // Per-step truncation: total dropped mass stays <= ~2*budget. 0 disables.
    double budget = 0.0;
    std::size_t support_cap = std::size_t{1} << 22;
    ConvPolicy conv{.allow_fft = false};  // direct rounding for certified stats
    std::vector<double> gf_points;
    bool keep_final_pmf = true;
    // Pin total mass to 1 - dropped after each step; see renormalized().
    bool renormalize = true;
};

struct IterateResult {
    IterationTrace trace;
    LatticePmf final_pmf;
    StopReason stop = StopReason::completed;
    int n_done = 0;
};

// Mass budget allotted to truncation at step n. Geometric for the first
// stretch, then polynomially damped so deep runs can keep shedding tail atoms
// while the total dropped mass stays bounded by ~2*eps.
double step_truncation_budget(double eps, int n);

IterateResult iterate(const ModelSpec& spec, const IterateOptions& opts);

// Certified enclosure of the free energy read off generation n:
//   first  = (mean_low(n) - 1/(m-1)) / m^n   (raw; negative values reported)
//   second = mean_high(n) / m^n
std::pair<double, double> free_energy_sandwich(const IterationTrace& trace, int n);

struct FreeEnergyOptions {
    double tol = 1e-6;              // absolute width target
    std::optional<double> rel_tol;  // optional relative width target (wins if set)
    int n_cap = 200;
    // Untruncated by default: removed mass compounds at rate m per step, so a
    // fixed budget starves any run deeper than ~log_m(1/budget) generations.
    double budget = 0.0;
    std::size_t support_cap = std::size_t{1} << 22;
    ConvPolicy conv{.allow_fft = false};
    int max_retries = 4;  // budget shrinks when truncation dominates the width
};

struct FreeEnergyResult {
    double low = 0.0;   // clamped at 0
    double high = 0.0;
    int n_used = 0;
    bool tol_reached = false;
    std::string flag;  // empty, "tolerance not reached", "support cap"
    double width() const { return high - low; }
};

FreeEnergyResult free_energy(const ModelSpec& spec, const FreeEnergyOptions& opts);

// CSV columns: n,mean_low,mean_high,zero_mass,support_size,dropped,F_low,F_high
void write_trace_csv(std::ostream& os, const IterationTrace& trace);

}  // namespace dr
