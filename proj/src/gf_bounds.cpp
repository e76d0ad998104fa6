#include "drlab/gf_bounds.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "drlab/util.hpp"

namespace dr {

std::vector<GfTracePoint> gf_trace(const ModelSpec& spec, double s, int n_max,
                                   const GfTraceOptions& opts) {
    if (!(s > 1.0)) throw ValidationError("gf_trace: s must exceed 1");
    spec.validate();

    std::vector<GfTracePoint> out;
    LatticePmf cur = make_initial(spec);
    double g_scalar = 0.0, gp_scalar = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) {
            if (cur.support_size() > opts.support_cap) break;
            double g_prev = out.back().g_zero;
            double g_prev_s = out.back().g_scalar;
            double gp_prev_s = out.back().g_deriv_scalar;
            // Scalar recursion, G_n(0) taken from the pmf:
            //   G_{n+1}(s)  = [h(G_n(s)) + (s-1) h(G_n(0))] / s
            //   G_{n+1}'(s) = h'(G_n(s)) G_n'(s) / s - [h(G_n(s)) - h(G_n(0))] / s^2
            g_scalar = (spec.nu.gf(g_prev_s) + (s - 1.0) * spec.nu.gf(g_prev)) / s;
            gp_scalar = spec.nu.gf_deriv(g_prev_s) * gp_prev_s / s -
                        (spec.nu.gf(g_prev_s) - spec.nu.gf(g_prev)) / (s * s);
            cur = renormalized(dr_step(cur, spec.nu, opts.conv));
        }
        GfTracePoint pt;
        pt.n = n;
        pt.s = s;
        pt.g = cur.gf(s);
        pt.g_deriv = cur.gf_deriv(s);
        pt.a = cur.gf_minus_one(s);
        pt.g_zero = cur.zero_mass();
        if (n == 0) {
            pt.g_scalar = pt.g;
            pt.g_deriv_scalar = pt.g_deriv;
        } else {
            pt.g_scalar = g_scalar;
            pt.g_deriv_scalar = gp_scalar;
            double rg = std::fabs(pt.g - pt.g_scalar) / std::max(1.0, std::fabs(pt.g));
            double rgp = std::fabs(pt.g_deriv - pt.g_deriv_scalar) / std::max(1.0, std::fabs(pt.g_deriv));
            pt.crosscheck_ok = rg <= opts.crosscheck_rtol && rgp <= opts.crosscheck_rtol;
        }
        out.push_back(pt);
    }
    return out;
}

ContractionReport verify_contraction(const std::vector<GfTracePoint>& trace,
                                     const OffspringLaw& nu, const ContractionCaps& caps) {
    ContractionReport rep;
    if (trace.empty()) return rep;
    const double m = nu.mean();
    const double s = trace.front().s;
    double gp_cap = caps.gp_cap > 0.0 ? caps.gp_cap : 1.0 / nu.c0(caps.a_cap);

    // Empirical analogue of the cap-crossing time: the inequality is asserted
    // strictly before the first n whose state exceeds either cap.
    int n1 = static_cast<int>(trace.size()) - 1;
    for (const GfTracePoint& pt : trace) {
        if (pt.a >= caps.a_cap || pt.g_deriv >= gp_cap) {
            rep.first_cap_exceed = pt.n;
            n1 = pt.n;
            break;
        }
    }
    const double gp0 = trace.front().g_deriv;
    for (const GfTracePoint& pt : trace) {
        if (pt.n < 1 || pt.n > n1) continue;
        double rhs = std::pow(m / s, pt.n) * gp0;
        double lhs = pt.g_deriv;
        if (lhs > rhs * (1.0 + 1e-9) + 1e-300) {
            rep.ok = false;
            rep.violations.push_back(pt.n);
        }
        if (lhs > 0.0) rep.min_margin_ratio = std::min(rep.min_margin_ratio, rhs / lhs);
        rep.checked_up_to = pt.n;
    }
    return rep;
}

namespace {

GfBoundResult run_schedule(const ModelSpec& spec, double s, int horizon, const GfBoundOptions& opts) {
    GfBoundResult res;
    res.p = spec.p;
    res.s = s;
    res.n_sched = horizon;
    const double m = spec.nu.mean();
    double gp_cap = 1.0 / spec.nu.c0(opts.a_cap);

    LatticePmf cur = make_initial(spec);
    bool caps_ok = true;
    for (int n = 0; n <= horizon; ++n) {
        if (n > 0) {
            if (cur.support_size() > opts.support_cap) {
                res.note = "support cap reached";
                return res;
            }
            cur = renormalized(dr_step(cur, spec.nu, opts.conv));
        }
        double a = cur.gf_minus_one(s);
        double gp = cur.gf_deriv(s);
        if (a >= opts.a_cap || gp >= gp_cap) caps_ok = false;
        if (n == horizon) {
            res.a_n = a;
            // Jensen: E(X_N) <= log(1+a_N)/log s; then divide by m^N.
            res.f_upper = div_pow(std::log1p(std::max(a, 0.0)) / std::log(s), m, horizon);
        }
    }
    res.established = caps_ok;
    if (!caps_ok) res.note = "cap exceeded before horizon";
    return res;
}

}  // namespace

GfBoundResult upper_bound_critical(const ModelSpec& spec, double c7, const GfBoundOptions& opts) {
    spec.validate();
    if (!spec.tail || spec.tail->kind != TailMeta::Kind::critical) {
        throw ValidationError("upper_bound_critical: spec must carry a critical tail family");
    }
    if (!(c7 > 0.0)) throw ValidationError("upper_bound_critical: c7 must be positive");
    const double m = spec.nu.mean();
    const double alpha = spec.tail->param;
    GfBoundResult res;
    res.p = spec.p;
    if (spec.p <= 0.0) {  // no excitation at all
        res.established = true;
        return res;
    }
    int horizon = static_cast<int>(std::floor(std::pow(c7 * spec.p, -1.0 / (2.0 + alpha))));
    if (horizon < 1) {
        res.note = "schedule horizon below 1; decrease c7 or p";
        return res;
    }
    double s = m * std::exp(-1.0 / static_cast<double>(horizon));
    if (!(s > 1.0)) {
        res.note = "schedule s fell below 1";
        return res;
    }
    return run_schedule(spec, s, horizon, opts);
}

GfBoundResult upper_bound_power_law(const ModelSpec& spec, double c9, const GfBoundOptions& opts) {
    spec.validate();
    if (!spec.tail || spec.tail->kind != TailMeta::Kind::exponential) {
        throw ValidationError("upper_bound_power_law: spec must carry an exponential tail family");
    }
    const double m = spec.nu.mean();
    const double theta = spec.tail->param;
    if (!(theta < std::log(m))) {
        throw ValidationError("upper_bound_power_law: requires theta < log m");
    }
    if (!(c9 > 0.0)) throw ValidationError("upper_bound_power_law: c9 must be positive");
    GfBoundResult res;
    res.p = spec.p;
    if (spec.p <= 0.0) {
        res.established = true;
        return res;
    }
    double eps = 1.0 / std::log(1.0 / spec.p);
    if (!(eps > 0.0) || eps >= theta) {
        res.note = "p too large for the schedule (need eps < theta)";
        return res;
    }
    double s = std::exp(theta - eps);
    double denom = std::log(m / s);
    double num = std::log(c9 * eps * eps / spec.p);
    if (!(denom > 0.0) || !(num > 0.0)) {
        res.note = "schedule horizon undefined at this (p, c9)";
        return res;
    }
    int horizon = static_cast<int>(std::floor(num / denom));
    if (horizon < 1) {
        res.note = "schedule horizon below 1";
        return res;
    }
    return run_schedule(spec, s, horizon, opts);
}

GfBoundResult upper_bound_critical_scan(const ModelSpec& spec, double c7_start, int ladder,
                                        const GfBoundOptions& opts) {
    GfBoundResult last;
    double c7 = c7_start;
    for (int i = 0; i < ladder; ++i, c7 *= 2.0) {
        last = upper_bound_critical(spec, c7, opts);
        if (last.established) return last;
    }
    return last;
}

GfBoundResult upper_bound_power_law_scan(const ModelSpec& spec, double c9_start, int ladder,
                                         const GfBoundOptions& opts) {
    GfBoundResult last;
    double c9 = c9_start;
    for (int i = 0; i < ladder; ++i, c9 *= 0.5) {
        last = upper_bound_power_law(spec, c9, opts);
        if (last.established) return last;
    }
    return last;
}

void write_gf_bound_csv(std::ostream& os, const std::vector<GfBoundResult>& rows) {
    os << "p,s,N,a_N,F_upper,established\n";
    char buf[256];
    for (const GfBoundResult& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%.17g,%.17g,%d\n", r.p, r.s, r.n_sched,
                      r.a_n, r.f_upper, r.established ? 1 : 0);
        os << buf;
    }
}

}  // namespace dr
