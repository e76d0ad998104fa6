#include "drlab/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "drlab/util.hpp"

namespace dr {

double step_truncation_budget(double eps, int n) {
    if (eps <= 0.0) return 0.0;
    if (n <= 40) return eps * std::pow(2.0, -n);
    double k = static_cast<double>(n - 40);
    return eps * 0x1.0p-40 / ((1.0 + k) * (1.0 + k));
}

namespace {

TraceRow make_row(int n, const LatticePmf& pmf, double m, const std::vector<double>& gf_points) {
    TraceRow row;
    row.n = n;
    row.mean_low = pmf.mean();
    row.mean_high = pmf.mean_upper();
    row.zero_mass = pmf.zero_mass();
    row.support = pmf.support_size();
    row.dropped = pmf.dropped();
    row.f_low_raw = div_pow(row.mean_low - 1.0 / (m - 1.0), m, n);
    row.f_high = div_pow(row.mean_high, m, n);
    row.trunc_width = div_pow(pmf.dropped_mean_bound(), m, n);
    for (double s : gf_points) {
        row.gf.push_back({s, pmf.gf(s), pmf.gf_deriv(s)});
    }
    return row;
}

}  // namespace

IterateResult iterate(const ModelSpec& spec, const IterateOptions& opts) {
    if (opts.n_max < 0) throw ValidationError("iterate: n_max must be >= 0");
    IterateResult res;
    res.trace.m = spec.nu.mean();

    LatticePmf cur = make_initial(spec);
    res.trace.rows.push_back(make_row(0, cur, res.trace.m, opts.gf_points));
    for (int n = 1; n <= opts.n_max; ++n) {
        if (cur.support_size() > opts.support_cap) {
            res.stop = StopReason::support_cap;
            break;
        }
        cur = dr_step(cur, spec.nu, opts.conv);
        double budget = step_truncation_budget(opts.budget, n);
        if (budget > 0.0) cur = truncate(cur, budget);
        if (opts.renormalize) cur = renormalized(cur);
        res.trace.rows.push_back(make_row(n, cur, res.trace.m, opts.gf_points));
        res.n_done = n;
    }
    if (opts.keep_final_pmf) res.final_pmf = std::move(cur);
    return res;
}

std::pair<double, double> free_energy_sandwich(const IterationTrace& trace, int n) {
    if (n < 0 || n >= static_cast<int>(trace.rows.size())) {
        throw ValidationError("free_energy_sandwich: generation not in trace");
    }
    const TraceRow& row = trace.rows[static_cast<std::size_t>(n)];
    return {row.f_low_raw, row.f_high};
}

FreeEnergyResult free_energy(const ModelSpec& spec, const FreeEnergyOptions& opts) {
    if (!(opts.tol > 0.0)) throw ValidationError("free_energy: tol must be positive");

    double budget = opts.budget;
    FreeEnergyResult best;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        // Intersect the per-generation enclosures; each one is certified.
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        int n_at_best = 0;
        bool reached = false;
        StopReason stop = StopReason::completed;

        LatticePmf cur = make_initial(spec);
        const double m = spec.nu.mean();
        double trunc_part = 0.0;
        for (int n = 0; n <= opts.n_cap; ++n) {
            if (n > 0) {
                if (cur.support_size() > opts.support_cap) {
                    stop = StopReason::support_cap;
                    break;
                }
                cur = dr_step(cur, spec.nu, opts.conv);
                double b = step_truncation_budget(budget, n);
                if (b > 0.0) cur = truncate(cur, b);
                cur = renormalized(cur);
            }
            double low_raw = div_pow(cur.mean() - 1.0 / (m - 1.0), m, n);
            double high = div_pow(cur.mean_upper(), m, n);
            if (low_raw > lo) lo = low_raw;
            if (high < hi) {
                hi = high;
                n_at_best = n;
                trunc_part = div_pow(cur.dropped_mean_bound(), m, n);
            }
            double width = hi - lo;
            bool ok_abs = width <= opts.tol;
            bool ok_rel = opts.rel_tol && lo > 0.0 && width <= *opts.rel_tol * lo;
            if ((opts.rel_tol && ok_rel) || (!opts.rel_tol && ok_abs)) {
                reached = true;
                break;
            }
        }

        FreeEnergyResult r;
        r.low = std::max(lo, 0.0);
        r.high = hi;
        r.n_used = n_at_best;
        r.tol_reached = reached;
        if (!reached) r.flag = stop == StopReason::support_cap ? "support cap" : "tolerance not reached";
        if (attempt == 0 || r.width() < best.width()) best = r;
        if (reached) return r;
        // Retry only when truncation dominates the width; otherwise more budget
        // cannot help. The shrink is aggressive because removed mass compounds
        // at rate m per step, so deep horizons need far smaller budgets.
        if (trunc_part < 0.5 * (r.high - r.low) || budget <= 1e-300) break;
        budget *= 1e-8;
    }
    return best;
}

void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
    os << "n,mean_low,mean_high,zero_mass,support_size,dropped,F_low,F_high\n";
    char buf[256];
    for (const TraceRow& r : trace.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g\n", r.n,
                      r.mean_low, r.mean_high, r.zero_mass, r.support, r.dropped, r.f_low_raw,
                      r.f_high);
        os << buf;
    }
}

}  // namespace dr
