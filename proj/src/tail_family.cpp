#include "drlab/tail_family.hpp"

#include <cmath>
#include <map>

#include "drlab/util.hpp"

namespace dr {

namespace {

double reference_weight(TailMeta::Kind kind, double param, double m, int k) {
    if (kind == TailMeta::Kind::exponential) return std::exp(-param * k);
    return std::pow(static_cast<double>(k), param) * std::pow(m, -static_cast<double>(k));
}

double tail_beyond(TailMeta::Kind kind, double param, double m, int k_max) {
    // Terms decay at least geometrically; sum until they vanish in double.
    double total = 0.0;
    for (int k = k_max + 1; k < k_max + 100000; ++k) {
        double w = reference_weight(kind, param, m, k);
        total += w;
        if (w < total * 1e-18 + 1e-300) break;
    }
    return total;
}

void check_params(TailMeta::Kind kind, double param, double m) {
    if (!(m > 1.0)) throw ValidationError("tail family: m must exceed 1");
    if (kind == TailMeta::Kind::exponential && !(param > 0.0)) {
        throw ValidationError("tail family: theta must be positive");
    }
    if (kind == TailMeta::Kind::critical && !(param > -2.0)) {
        throw ValidationError("tail family: alpha must exceed -2");
    }
}

}  // namespace

TailFamily make_tail_family(TailMeta::Kind kind, double param, double m, int k_max) {
    check_params(kind, param, m);
    if (k_max < 4) throw ValidationError("tail family: k_max must be at least 4");

    std::map<std::int64_t, double> masses;
    double total = 0.0;
    for (int k = 1; k <= k_max; ++k) total += reference_weight(kind, param, m, k);
    double beyond = tail_beyond(kind, param, m, k_max);
    for (int k = 1; k <= k_max; ++k) {
        masses[k] = reference_weight(kind, param, m, k) / total;
    }

    TailFamily fam;
    fam.meta = {kind, param};
    fam.m = m;
    fam.k_max = k_max;
    fam.y0 = LatticePmf::from_masses(masses);
    fam.remainder = beyond / (total + beyond);

    // Realized sandwich constants: T(x) / ref(x) over the support.
    double cum = 1.0;
    fam.c_lo = std::numeric_limits<double>::infinity();
    fam.c_hi = 0.0;
    for (int x = 1; x <= k_max; ++x) {
        double ratio = cum / reference_weight(kind, param, m, x);
        fam.c_lo = std::min(fam.c_lo, ratio);
        fam.c_hi = std::max(fam.c_hi, ratio);
        cum -= masses[x];
        if (cum < 0.0) cum = 0.0;
    }
    return fam;
}

int auto_k_max(TailMeta::Kind kind, double param, double m, double remainder_target) {
    check_params(kind, param, m);
    if (!(remainder_target > 0.0)) throw ValidationError("tail family: remainder target must be positive");
    double total = 0.0;
    for (int k = 1; k <= 100000; ++k) {
        total += reference_weight(kind, param, m, k);
        if (k >= 4) {
            double beyond = tail_beyond(kind, param, m, k);
            if (beyond / (total + beyond) < remainder_target) return k;
        }
    }
    throw ValidationError("tail family: remainder target unreachable");
}

double family_pc_closed_form(TailMeta::Kind kind, double param, double m, int k_max) {
    check_params(kind, param, m);
    double mr = std::round(m);
    if (std::fabs(m - mr) > 1e-9 || mr < 2.0) {
        throw ValidationError("family_pc_closed_form: needs a deterministic integer m >= 2");
    }
    // E[((m-1) Y - 1) m^Y] with P(Y = k) proportional to w_k; for these
    // families w_k carries an m^{-k} (or e^{-theta k}) factor, so fold the
    // m^k in analytically instead of forming the overflowing power.
    double total_w = 0.0;
    double sum = 0.0;
    const double log_m = std::log(mr);
    bool saturated = false;
    for (int k = 1; k <= k_max; ++k) {
        double w = reference_weight(kind, param, m, k);
        total_w += w;
        double log_term = std::log(w) + k * log_m;
        if (log_term > 650.0) {
            saturated = true;
            continue;
        }
        sum += std::exp(log_term) * ((mr - 1.0) * k - 1.0);
        if (sum > 1e290) saturated = true;
    }
    if (saturated) return 0.0;
    double e = std::max(sum / total_w, 0.0);
    return 1.0 / (e + 1.0);
}

int sweep_k_max(TailMeta::Kind kind, double param, double m, double p_min) {
    if (!(p_min > 0.0)) throw ValidationError("sweep_k_max: p_min must be positive");
    int k = auto_k_max(kind, param, m, 1e-3 * p_min);
    while (family_pc_closed_form(kind, param, m, k) > p_min / 50.0) {
        k = k + k / 2 + 8;
        if (k > 200000) throw ValidationError("sweep_k_max: cap search diverged");
    }
    return k;
}

ModelSpec make_family_spec(const TailFamily& family, OffspringLaw nu, double p) {
    ModelSpec spec;
    spec.nu = std::move(nu);
    spec.y0 = family.y0;
    spec.p = p;
    spec.tail = family.meta;
    spec.validate();
    return spec;
}

}  // namespace dr
