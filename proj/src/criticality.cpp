#include "drlab/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "drlab/recursion.hpp"
#include "drlab/util.hpp"

namespace dr {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::supercritical: return "supercritical";
        case Verdict::subcritical: return "subcritical";
        default: return "undecided";
    }
}

nlohmann::json Certificate::to_json() const {
    nlohmann::json j{{"verdict", to_string(verdict)}, {"p", p}};
    j["witness_n"] = witness_n >= 0 ? nlohmann::json(witness_n) : nlohmann::json(nullptr);
    j["s"] = verdict == Verdict::subcritical ? nlohmann::json(s) : nlohmann::json(nullptr);
    j["mean_low"] = verdict == Verdict::supercritical ? nlohmann::json(mean_low) : nlohmann::json(nullptr);
    j["threshold"] = threshold;
    if (verdict == Verdict::subcritical) {
        j["a_n"] = a_n;
        j["c0_prime"] = c0_prime;
    }
    j["margin"] = margin;
    if (!note.empty()) j["note"] = note;
    return j;
}

double pc_closed_form(const LatticePmf& y0, double m_deterministic) {
    if (y0.step_den() != 1) {
        throw ValidationError("pc_closed_form: non-integer lattice unsupported");
    }
    if (y0.min_index() < 1) {
        throw ValidationError("pc_closed_form: Y0 must take values in {1,2,...}");
    }
    double mr = std::round(m_deterministic);
    if (std::fabs(m_deterministic - mr) > 1e-9 || mr < 2.0) {
        throw ValidationError("pc_closed_form: offspring count must be a deterministic integer >= 2");
    }
    const double m = mr;
    KahanSum e;
    bool overflow = false;
    y0.for_each_atom([&](std::int64_t k, double q) {
        double kk = static_cast<double>(k);
        if (kk * std::log(m) > 700.0) {
            overflow = true;
            return;
        }
        e.add(q * ((m - 1.0) * kk - 1.0) * std::pow(m, kk));
    });
    if (overflow) throw ValidationError("pc_closed_form: Y0 support too large for double range");
    double val = std::max(e.value(), 0.0);  // positive-part convention
    return 1.0 / (val + 1.0);
}

Certificate certify_supercritical(const ModelSpec& spec, const CertifyOptions& opts) {
    spec.validate();
    Certificate cert;
    cert.p = spec.p;
    const double m = spec.nu.mean();
    cert.threshold = 1.0 / (m - 1.0);

    ConvPolicy conv;
    conv.allow_fft = false;  // certified means use exact-rounding convolutions
    LatticePmf cur = make_initial(spec);
    // The dichotomy asks for a crossing at some n >= 1.
    for (int n = 1; n <= opts.n_max; ++n) {
        if (cur.support_size() > opts.support_cap) {
            cert.note = "support cap reached";
            return cert;
        }
        cur = dr_step(cur, spec.nu, conv);
        double b = step_truncation_budget(opts.budget, n);
        if (b > 0.0) cur = truncate(cur, b);
        cur = renormalized(cur);
        double mean_low = cur.mean();
        if (mean_low > cert.threshold * (1.0 + opts.margin) + 1e-15) {
            cert.verdict = Verdict::supercritical;
            cert.witness_n = n;
            cert.mean_low = mean_low;
            cert.margin = mean_low - cert.threshold;
            return cert;
        }
    }
    return cert;
}

namespace {

struct ScanState {
    double s = 0.0;
    double a = 0.0;  // upper bound on G_n(s) - 1, tracked without the 1
    bool alive = true;
};

Certificate run_subcritical_scan(const ModelSpec& spec, const std::vector<double>& s_values,
                                 const CertifyOptions& opts) {
    spec.validate();
    Certificate cert;
    cert.p = spec.p;
    const double m = spec.nu.mean();
    cert.threshold = m;  // s must clear m by the contraction margin
    constexpr double kACap = 1e9;

    LatticePmf cur = make_initial(spec);
    std::vector<ScanState> states;
    states.reserve(s_values.size());
    for (double s : s_values) {
        if (!(s > m)) throw ValidationError("certify_subcritical: s must exceed m");
        // Exact at n = 0 up to rounding; the inflation keeps it an upper bound.
        states.push_back({s, cur.gf_minus_one(s) * (1.0 + 1e-12), true});
    }

    ConvPolicy conv;
    conv.allow_fft = false;
    for (int n = 0; n <= opts.n_max; ++n) {
        bool any_alive = false;
        for (const ScanState& st : states) {
            if (!st.alive) continue;
            any_alive = true;
            double a = std::max(st.a, 0.0);
            double c0p = spec.nu.c0_prime(a);
            double lhs = m * (1.0 + c0p * a);
            if (lhs <= st.s * (1.0 - opts.margin)) {
                cert.verdict = Verdict::subcritical;
                cert.witness_n = n;
                cert.s = st.s;
                cert.a_n = a;
                cert.c0_prime = c0p;
                cert.margin = st.s - lhs;
                return cert;
            }
        }
        if (!any_alive || n == opts.n_max) break;
        if (cur.mean() > (1.0 + opts.margin) / (m - 1.0) + 1e-15) {
            // Certified supercritical territory; no contraction can follow.
            cert.note = "mean crossed the dichotomy threshold";
            return cert;
        }

        // Advance the bound to generation n+1 via
        //   a' = [h(1+a) - 1 + (s-1)(h(zeta) - 1)] / s,
        // with zeta an upper bound on P(X_n = 0). The zero mass must be read
        // before the pmf steps; the missing-mass term covers truncation and
        // underflow losses alike.
        double missing = std::max(0.0, 1.0 - cur.total_mass());
        double zero_up = std::min(1.0, cur.zero_mass() + missing + 1e-12);
        double h_zeta_m1 = spec.nu.gf_minus_one(zero_up);  // <= 0
        for (ScanState& st : states) {
            if (!st.alive) continue;
            st.a = (spec.nu.gf_1p_minus_one(std::max(st.a, 0.0)) + (st.s - 1.0) * h_zeta_m1) / st.s;
            if (!(st.a < kACap)) st.alive = false;
        }
        if (cur.support_size() > opts.support_cap) {
            cert.note = "support cap reached";
            return cert;
        }
        cur = dr_step(cur, spec.nu, conv);
        double b = step_truncation_budget(opts.budget, n + 1);
        if (b > 0.0) cur = truncate(cur, b);
        cur = renormalized(cur);
    }
    return cert;
}

}  // namespace

Certificate certify_subcritical(const ModelSpec& spec, double s, const CertifyOptions& opts) {
    return run_subcritical_scan(spec, {s}, opts);
}

Certificate certify_subcritical_scan(const ModelSpec& spec, const CertifyOptions& opts) {
    const double m = spec.nu.mean();
    std::vector<double> grid;
    for (int j = opts.s_grid_j_lo; j <= opts.s_grid_j_hi; ++j) {
        grid.push_back(m * (1.0 + std::pow(2.0, -j)));
    }
    return run_subcritical_scan(spec, grid, opts);
}

nlohmann::json BisectResult::to_json() const {
    return nlohmann::json{{"p_lo", p_lo},
                          {"p_hi", p_hi},
                          {"width", width()},
                          {"converged", converged},
                          {"flag", flag},
                          {"evaluations", evaluations},
                          {"lo_certificate", lo_cert.to_json()},
                          {"hi_certificate", hi_cert.to_json()}};
}

BisectResult pc_bisect(const std::function<ModelSpec(double)>& family, double p_lo, double p_hi,
                       double tol, const CertifyOptions& opts) {
    if (!(tol > 0.0)) throw ValidationError("pc_bisect: tol must be positive");
    if (!(p_lo < p_hi)) throw ValidationError("pc_bisect: need p_lo < p_hi");

    BisectResult res;
    res.p_lo = p_lo;
    res.p_hi = p_hi;
    res.lo_cert = certify_subcritical_scan(family(p_lo), opts);
    ++res.evaluations;
    if (res.lo_cert.verdict != Verdict::subcritical) {
        throw ValidationError("pc_bisect: bracket not established (p_lo not certified subcritical)");
    }
    res.hi_cert = certify_supercritical(family(p_hi), opts);
    ++res.evaluations;
    if (res.hi_cert.verdict != Verdict::supercritical) {
        throw ValidationError("pc_bisect: bracket not established (p_hi not certified supercritical)");
    }

    CertifyOptions quick = opts;
    quick.n_max = std::min(opts.n_max, 300);
    while (res.width() > tol) {
        double mid = 0.5 * (res.p_lo + res.p_hi);
        ModelSpec spec = family(mid);
        Certificate c = certify_supercritical(spec, quick);
        ++res.evaluations;
        if (c.verdict != Verdict::supercritical) {
            Certificate sub = certify_subcritical_scan(spec, opts);
            ++res.evaluations;
            if (sub.verdict == Verdict::subcritical) {
                res.p_lo = mid;
                res.lo_cert = sub;
                continue;
            }
            c = certify_supercritical(spec, opts);
            ++res.evaluations;
        }
        if (c.verdict == Verdict::supercritical) {
            res.p_hi = mid;
            res.hi_cert = c;
        } else {
            res.flag = "undecided midpoint";
            return res;
        }
    }
    res.converged = true;
    return res;
}

bool positivity_check(const ModelSpec& spec) {
    const double m = spec.nu.mean();
    if (!spec.tail) return true;  // finite support
    switch (spec.tail->kind) {
        case TailMeta::Kind::exponential:
            return spec.tail->param > std::log(m);
        case TailMeta::Kind::critical:
            // E[Y0 m^Y0] = sum k^(1+alpha) diverges on the admissible range alpha > -2.
            return false;
    }
    throw ValidationError("positivity_check: unknown tail family");
}

}  // namespace dr
