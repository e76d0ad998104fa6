#pragma once

#include <functional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "drlab/pmf.hpp"

namespace dr {

enum class Verdict { supercritical, subcritical, undecided };

std::string to_string(Verdict v);

// Numeric witness for a phase verdict. Supercritical: generation witness_n
// with certified mean_low above 1/(m-1). Subcritical: evaluation point s,
// the bound a_n on G_n(s)-1, the local quadratic coefficient c0_prime valid
// on [0, a_n], and the contraction margin s - m(1 + c0_prime * a_n).
struct Certificate {
    Verdict verdict = Verdict::undecided;
    double p = 0.0;
    int witness_n = -1;
    double s = 0.0;
    double mean_low = 0.0;
    double threshold = 0.0;
    double a_n = 0.0;
    double c0_prime = 0.0;
    double margin = 0.0;
    std::string note;

    nlohmann::json to_json() const;
};

struct CertifyOptions {
    int n_max = 1200;
    // Certificates run untruncated by default: removed mass compounds at rate
    // m per step through the convolution, which starves deep runs long before
    // the witnesses appear. Double underflow is the only loss at budget 0.
    double budget = 0.0;
    std::size_t support_cap = std::size_t{1} << 21;
    double margin = 1e-9;  // relative safety margin on certified comparisons
    int s_grid_j_lo = -2;  // subcritical scan: s = m (1 + 2^-j)
    int s_grid_j_hi = 12;
};

// Closed-form critical point for deterministic offspring count m and
// integer-valued Y0: p_c = 1 / (E[((m-1) Y0 - 1) m^Y0]^+ + 1).
double pc_closed_form(const LatticePmf& y0, double m_deterministic);

Certificate certify_supercritical(const ModelSpec& spec, const CertifyOptions& opts = {});

// Contraction certificate at a fixed s > m. G_n(s) is tracked through a
// rigorous scalar upper bound seeded by the exact G_0(s), with P(X_n = 0)
// upper-bounded from the pmf iterates; tail truncation can only weaken the
// certificate, never unsound it.
Certificate certify_subcritical(const ModelSpec& spec, double s, const CertifyOptions& opts = {});

// Scan the geometric s grid m (1 + 2^-j) and accept the first success.
Certificate certify_subcritical_scan(const ModelSpec& spec, const CertifyOptions& opts = {});

struct BisectResult {
    double p_lo = 0.0;
    double p_hi = 0.0;
    Certificate lo_cert;
    Certificate hi_cert;
    bool converged = false;
    std::string flag;  // "budget exhausted", "undecided midpoint", ...
    int evaluations = 0;

    double width() const { return p_hi - p_lo; }
    nlohmann::json to_json() const;
};

// Shrink a certified bracket around p_c. Requires a subcritical certificate at
// p_lo and a supercritical one at p_hi to start.
BisectResult pc_bisect(const std::function<ModelSpec(double)>& family, double p_lo, double p_hi,
                       double tol, const CertifyOptions& opts = {});

// p_c > 0 test from tail metadata: finite support -> true; exponential(theta)
// -> theta > log m; critical(alpha) -> false on its admissible range.
bool positivity_check(const ModelSpec& spec);

}  // namespace dr
