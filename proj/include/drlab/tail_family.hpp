#pragma once

#include "drlab/pmf.hpp"

namespace dr {

// Parametric initial law Y0 with a controlled tail, realized as a finite pmf
// on {1,...,k_max}: P(Y0 = k) proportional to e^{-theta k} (exponential) or
// k^alpha m^{-k} (critical). The realized tail is sandwiched between
// c_lo * ref(x) and c_hi * ref(x) on 1..k_max, and `remainder` reports the
// unnormalized reference mass beyond k_max.
struct TailFamily {
    TailMeta meta;
    double m = 2.0;
    int k_max = 0;
    LatticePmf y0;
    double remainder = 0.0;
    double c_lo = 0.0;
    double c_hi = 0.0;
};

TailFamily make_tail_family(TailMeta::Kind kind, double param, double m, int k_max);

// Smallest k_max whose relative remainder drops below the target.
int auto_k_max(TailMeta::Kind kind, double param, double m, double remainder_target);

// Closed-form critical point of the realized (truncated) family under a
// deterministic offspring count m, evaluated from the analytic weights so
// large caps cannot overflow. Saturates at 0 once the defining sum passes
// the double range.
double family_pc_closed_form(TailMeta::Kind kind, double param, double m, int k_max);

// Cap for sweep work at parameters down to p_min: meets the remainder target
// AND keeps the realized family's own critical point below p_min/50, which a
// remainder rule alone cannot guarantee (truncating the critical family
// leaves p_c ~ k_max^{-(2+alpha)}).
int sweep_k_max(TailMeta::Kind kind, double param, double m, double p_min);

ModelSpec make_family_spec(const TailFamily& family, OffspringLaw nu, double p);

}  // namespace dr
