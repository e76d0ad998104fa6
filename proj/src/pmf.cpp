#include "drlab/pmf.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drlab/fft.hpp"
#include "drlab/util.hpp"

namespace dr {

namespace {

constexpr double kMassTol = 1e-12;
// Below this, FFT output is zeroed and charged to the truncation ledger.
constexpr double kFftFloor = 0x1.0p-500;

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace

// --- LatticePmf -------------------------------------------------------------

LatticePmf LatticePmf::delta(std::int64_t index, std::uint32_t step_den) {
    Raw raw;
    raw.base = index;
    raw.mass = {1.0};
    raw.step_den = step_den;
    return from_raw(std::move(raw));
}

LatticePmf LatticePmf::from_masses(const std::map<std::int64_t, double>& masses,
                                   std::uint32_t step_den) {
    if (masses.empty()) throw ValidationError("pmf: empty support");
    Raw raw;
    raw.step_den = step_den;
    raw.base = masses.begin()->first;
    std::int64_t top = masses.rbegin()->first;
    raw.mass.assign(static_cast<std::size_t>(top - raw.base + 1), 0.0);
    for (const auto& [k, m] : masses) {
        if (k < 0) throw ValidationError("pmf: negative lattice index");
        if (m < 0) throw ValidationError("pmf: negative mass");
        raw.mass[static_cast<std::size_t>(k - raw.base)] = m;
    }
    return from_raw(std::move(raw));
}

LatticePmf LatticePmf::from_raw(Raw raw) {
    if (raw.step_den == 0) throw ValidationError("pmf: zero lattice step denominator");
    LatticePmf p;
    p.base_ = raw.base;
    p.mass_ = std::move(raw.mass);
    p.step_den_ = raw.step_den;
    p.dropped_ = raw.dropped;
    p.dropped_mean_bound_ = raw.dropped_mean_bound;
    p.underflow_trimmed_ = raw.underflow_trimmed;
    p.trim();
    return p;
}

void LatticePmf::trim() {
    std::size_t lo = 0;
    while (lo < mass_.size() && mass_[lo] == 0.0) ++lo;
    std::size_t hi = mass_.size();
    while (hi > lo && mass_[hi - 1] == 0.0) --hi;
    if (lo > 0 || hi < mass_.size()) {
        mass_.assign(mass_.begin() + static_cast<std::ptrdiff_t>(lo),
                     mass_.begin() + static_cast<std::ptrdiff_t>(hi));
        base_ += static_cast<std::int64_t>(lo);
    }
    if (mass_.empty()) base_ = 0;
}

std::size_t LatticePmf::support_size() const {
    std::size_t n = 0;
    for (double m : mass_) n += (m != 0.0);
    return n;
}

double LatticePmf::mass_at(std::int64_t index) const {
    if (index < base_ || index > max_index()) return 0.0;
    return mass_[static_cast<std::size_t>(index - base_)];
}

void LatticePmf::for_each_atom(const std::function<void(std::int64_t, double)>& fn) const {
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        if (mass_[i] != 0.0) fn(base_ + static_cast<std::int64_t>(i), mass_[i]);
    }
}

double LatticePmf::total_mass() const { return kahan_total(mass_); }

double LatticePmf::mean() const {
    KahanSum k;
    const double h = step();
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        if (mass_[i] != 0.0) k.add(mass_[i] * static_cast<double>(base_ + static_cast<std::int64_t>(i)) * h);
    }
    return k.value();
}

double LatticePmf::tail(double t) const {
    KahanSum k;
    const double h = step();
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double v = static_cast<double>(base_ + static_cast<std::int64_t>(i)) * h;
        if (v >= t - 1e-9) k.add(mass_[i]);
    }
    return k.value();
}

double LatticePmf::gf(double s) const {
    if (s < 0.0) throw ValidationError("gf: s must be >= 0");
    if (s == 0.0) return zero_mass();
    const double h = step();
    const double ls = std::log(s);
    KahanSum k;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double m = mass_[i];
        if (m == 0.0) continue;
        double v = static_cast<double>(base_ + static_cast<std::int64_t>(i)) * h;
        double e = v * ls;
        if (std::fabs(e) < 600.0 && m > 1e-250) {
            k.add(m * std::exp(e));
        } else {
            // Guard against pow overflow when the mass compensates the power.
            k.add(std::exp(std::log(m) + e));
        }
    }
    return k.value();
}

double LatticePmf::gf_minus_one(double s) const {
    if (s <= 0.0) throw ValidationError("gf_minus_one: s must be > 0");
    const double h = step();
    const double ls = std::log(s);
    KahanSum k;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double m = mass_[i];
        if (m == 0.0) continue;
        double v = static_cast<double>(base_ + static_cast<std::int64_t>(i)) * h;
        if (v == 0.0) continue;
        double e = v * ls;
        if (e < 600.0) {
            k.add(m * std::expm1(e));
        } else {
            k.add(std::exp(std::log(m) + e));
        }
    }
    return k.value();
}

double LatticePmf::gf_deriv(double s) const {
    if (s <= 0.0) throw ValidationError("gf_deriv: s must be > 0");
    const double h = step();
    const double ls = std::log(s);
    KahanSum k;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double m = mass_[i];
        if (m == 0.0) continue;
        double v = static_cast<double>(base_ + static_cast<std::int64_t>(i)) * h;
        if (v == 0.0) continue;
        double e = (v - 1.0) * ls;
        if (std::fabs(e) < 600.0 && m > 1e-250) {
            k.add(m * v * std::exp(e));
        } else {
            k.add(std::exp(std::log(m) + std::log(v) + e));
        }
    }
    return k.value();
}

void LatticePmf::validate() const {
    if (base_ < 0) throw ValidationError("pmf: support extends below 0");
    for (double m : mass_) {
        if (!(m >= 0.0)) throw ValidationError("pmf: negative or NaN mass");
    }
    double t = total_mass() + dropped_;
    if (std::fabs(t - 1.0) > kMassTol) {
        throw ValidationError("pmf: mass + dropped = " + std::to_string(t) + " not within 1e-12 of 1");
    }
    if (dropped_ == 0.0 && dropped_mean_bound_ != 0.0) {
        throw ValidationError("pmf: dropped_mean_bound without dropped mass");
    }
    if (dropped_ < 0.0 || dropped_mean_bound_ < 0.0) {
        throw ValidationError("pmf: negative truncation ledger");
    }
}

nlohmann::json LatticePmf::to_json() const {
    nlohmann::json masses = nlohmann::json::object();
    for_each_atom([&](std::int64_t k, double m) { masses[std::to_string(k)] = m; });
    return nlohmann::json{{"step", "1/" + std::to_string(step_den_)},
                          {"masses", masses},
                          {"dropped", dropped_},
                          {"dropped_mean_bound", dropped_mean_bound_}};
}

LatticePmf LatticePmf::from_json(const nlohmann::json& j) {
    std::uint32_t den = 1;
    if (j.contains("step")) {
        const auto& st = j.at("step");
        if (st.is_string()) {
            std::string s = st.get<std::string>();
            auto slash = s.find('/');
            long num = std::stol(s.substr(0, slash));
            long d = slash == std::string::npos ? 1 : std::stol(s.substr(slash + 1));
            if (num != 1 || d < 1) throw ValidationError("pmf: step must be of the form 1/L");
            den = static_cast<std::uint32_t>(d);
        } else if (st.is_number()) {
            if (st.get<double>() != 1.0) throw ValidationError("pmf: numeric step must be 1");
        }
    }
    std::map<std::int64_t, double> masses;
    for (const auto& [key, val] : j.at("masses").items()) {
        masses[std::stoll(key)] = val.get<double>();
    }
    Raw raw;
    if (masses.empty()) throw ValidationError("pmf: empty masses");
    raw.base = masses.begin()->first;
    raw.mass.assign(static_cast<std::size_t>(masses.rbegin()->first - raw.base + 1), 0.0);
    for (const auto& [k, m] : masses) raw.mass[static_cast<std::size_t>(k - raw.base)] = m;
    raw.step_den = den;
    raw.dropped = j.value("dropped", 0.0);
    raw.dropped_mean_bound = j.value("dropped_mean_bound", 0.0);
    return from_raw(std::move(raw));
}

// --- OffspringLaw -----------------------------------------------------------

OffspringLaw OffspringLaw::deterministic(int k) {
    return from_probs({{k, 1.0}});
}

OffspringLaw OffspringLaw::from_probs(const std::map<int, double>& probs) {
    OffspringLaw law;
    double total = 0.0;
    for (const auto& [k, p] : probs) {
        if (k < 1) throw ValidationError("offspring law: support must be in {1,2,...}");
        if (p < 0.0) throw ValidationError("offspring law: negative probability");
        if (p == 0.0) continue;
        law.atoms_.emplace_back(k, p);
        total += p;
        law.mean_ += k * p;
    }
    if (std::fabs(total - 1.0) > kMassTol) {
        throw ValidationError("offspring law: probabilities sum to " + std::to_string(total));
    }
    if (!(law.mean_ > 1.0)) {
        throw ValidationError("offspring law: mean m must exceed 1");
    }
    return law;
}

OffspringLaw OffspringLaw::uniform(const std::vector<int>& ks) {
    std::map<int, double> probs;
    for (int k : ks) probs[k] += 1.0 / static_cast<double>(ks.size());
    return from_probs(probs);
}

double OffspringLaw::gf(double x) const {
    double r = 0.0;
    for (const auto& [k, p] : atoms_) r += p * std::pow(x, k);
    return r;
}

double OffspringLaw::gf_deriv(double x) const {
    double r = 0.0;
    for (const auto& [k, p] : atoms_) r += p * k * std::pow(x, k - 1);
    return r;
}

double OffspringLaw::gf_1p_minus_one(double a) const {
    double r = 0.0;
    for (const auto& [k, p] : atoms_) r += p * std::expm1(k * std::log1p(a));
    return r;
}

double OffspringLaw::gf_minus_one(double x) const {
    if (!(x > 0.0)) return gf(x) - 1.0;
    double r = 0.0;
    for (const auto& [k, p] : atoms_) r += p * std::expm1(k * std::log(x));
    return r;
}

double OffspringLaw::c0_prime(double a_max) const {
    // h(1+a) - 1 = m a + sum_{j>=2} e_j a^j with e_j = sum_k P(k) C(k,j) >= 0.
    double c = 0.0;
    for (const auto& [k, p] : atoms_) {
        for (int j = 2; j <= k; ++j) {
            c += p * binom(k, j) * std::pow(a_max, j - 2);
        }
    }
    return c / mean_;
}

double OffspringLaw::c0(double a_max) const {
    // h'(1+a) = m + sum_{j>=1} f_j a^j with f_j = sum_k k P(k) C(k-1,j).
    double c = 0.0;
    for (const auto& [k, p] : atoms_) {
        for (int j = 1; j <= k - 1; ++j) {
            c += p * k * binom(k - 1, j) * std::pow(a_max, j - 1);
        }
    }
    return c;
}

std::vector<std::pair<int, double>> OffspringLaw::size_biased() const {
    std::vector<std::pair<int, double>> out;
    out.reserve(atoms_.size());
    for (const auto& [k, p] : atoms_) out.emplace_back(k, k * p / mean_);
    return out;
}

// --- ModelSpec ---------------------------------------------------------------

void ModelSpec::validate() const {
    if (nu.atoms().empty()) throw ValidationError("model: offspring law missing");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("model: p must lie in [0,1]");
    if (y0.empty()) throw ValidationError("model: Y0 has empty support");
    if (y0.min_index() < 1) throw ValidationError("model: Y0 must have strictly positive support");
    if (y0.dropped() != 0.0) throw ValidationError("model: Y0 must be exact (dropped = 0)");
    double t = y0.total_mass();
    if (std::fabs(t - 1.0) > kMassTol) {
        throw ValidationError("model: Y0 mass sums to " + std::to_string(t));
    }
}

// --- operations --------------------------------------------------------------

LatticePmf make_initial(const ModelSpec& spec) {
    spec.validate();
    LatticePmf::Raw raw;
    raw.step_den = spec.y0.step_den();
    raw.base = 0;
    raw.mass.assign(static_cast<std::size_t>(spec.y0.max_index() + 1), 0.0);
    raw.mass[0] = 1.0 - spec.p;
    spec.y0.for_each_atom([&](std::int64_t k, double m) {
        raw.mass[static_cast<std::size_t>(k)] += spec.p * m;
    });
    return LatticePmf::from_raw(std::move(raw));
}

LatticePmf convolve(const LatticePmf& a, const LatticePmf& b, const ConvPolicy& policy) {
    if (a.step_den() != b.step_den()) {
        throw ValidationError("convolve: mismatched lattice steps");
    }
    if (a.empty() || b.empty()) {
        LatticePmf::Raw raw;
        raw.step_den = a.step_den();
        raw.dropped = 1.0;  // all mass previously removed
        raw.dropped_mean_bound = a.dropped_mean_bound() + b.dropped_mean_bound();
        return LatticePmf::from_raw(std::move(raw));
    }

    const std::size_t na = static_cast<std::size_t>(a.max_index() - a.min_index()) + 1;
    const std::size_t nb = static_cast<std::size_t>(b.max_index() - b.min_index()) + 1;
    std::vector<double> va(na, 0.0), vb(nb, 0.0);
    a.for_each_atom([&](std::int64_t k, double m) { va[static_cast<std::size_t>(k - a.min_index())] = m; });
    b.for_each_atom([&](std::int64_t k, double m) { vb[static_cast<std::size_t>(k - b.min_index())] = m; });

    LatticePmf::Raw raw;
    raw.step_den = a.step_den();
    raw.base = a.min_index() + b.min_index();
    raw.underflow_trimmed = a.underflow_trimmed() || b.underflow_trimmed();

    double extra_dropped = 0.0;
    double extra_bound = 0.0;
    const bool use_fft = policy.allow_fft && na * nb >= policy.fft_threshold;
    if (!use_fft) {
        raw.mass.assign(na + nb - 1, 0.0);
        // The outer loop runs over the shorter operand so the inner loop streams.
        if (na <= nb) {
            for (std::size_t i = 0; i < na; ++i) {
                double x = va[i];
                if (x == 0.0) continue;
                for (std::size_t j = 0; j < nb; ++j) {
                    double t = x * vb[j];
                    raw.mass[i + j] += t;
                    if (t == 0.0 && vb[j] != 0.0) raw.underflow_trimmed = true;
                }
            }
        } else {
            for (std::size_t j = 0; j < nb; ++j) {
                double x = vb[j];
                if (x == 0.0) continue;
                for (std::size_t i = 0; i < na; ++i) {
                    double t = x * va[i];
                    raw.mass[i + j] += t;
                    if (t == 0.0 && va[i] != 0.0) raw.underflow_trimmed = true;
                }
            }
        }
    } else {
        raw.mass = convolve_fft(va, vb);
        // Entries near the transform's absolute noise level are fabricated;
        // clearing them (with ledger accounting) keeps the fake tail from
        // cascading. The result is fine for mass/mean bookkeeping but loses
        // the sub-noise tail, so certified paths use the direct route.
        double peak = 0.0;
        for (double x : raw.mass) peak = std::max(peak, x);
        const double floor = std::max(kFftFloor, 1e-17 * peak);
        const double h = 1.0 / a.step_den();
        for (std::size_t i = 0; i < raw.mass.size(); ++i) {
            double& x = raw.mass[i];
            if (x < floor) {
                assert(x > -1e-11 && "fft noise beyond expected scale");
                if (x > 0.0) {
                    extra_dropped += x;
                    extra_bound += x * static_cast<double>(raw.base + static_cast<std::int64_t>(i)) * h;
                }
                x = 0.0;
            }
        }
        raw.underflow_trimmed = true;
    }

    // Missing mass of the product measure: 1 - (1-da)(1-db), plus anything the
    // transform path floored away. The mean bound picks up the cross terms
    // mean_a*db + mean_b*da so [mean, mean+bound] still encloses the exact mean.
    const double da = a.dropped();
    const double db = b.dropped();
    raw.dropped = da + db - da * db + extra_dropped;
    raw.dropped_mean_bound = a.dropped_mean_bound() + b.dropped_mean_bound() +
                             a.mean() * db + b.mean() * da + extra_bound;
    return LatticePmf::from_raw(std::move(raw));
}

LatticePmf dr_step(const LatticePmf& pmf, const OffspringLaw& nu, const ConvPolicy& policy) {
    if (nu.atoms().empty()) throw ValidationError("dr_step: offspring law missing");
    if (pmf.min_index() < 0) throw ValidationError("dr_step: support below 0");

    // nu-mixture of k-fold self-convolutions.
    std::vector<LatticePmf> powers;
    powers.reserve(static_cast<std::size_t>(nu.max_k()));
    powers.push_back(pmf);
    for (int k = 2; k <= nu.max_k(); ++k) {
        powers.push_back(convolve(powers.back(), pmf, policy));
    }

    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& [k, w] : nu.atoms()) {
        const LatticePmf& piece = powers[static_cast<std::size_t>(k - 1)];
        if (piece.empty()) continue;
        lo = std::min(lo, piece.min_index());
        hi = std::max(hi, piece.max_index());
    }

    const std::int64_t shift = pmf.step_den();  // "-1" in lattice units
    LatticePmf::Raw raw;
    raw.step_den = pmf.step_den();
    if (hi < lo) {  // every piece empty
        raw.dropped = 1.0;
        for (const auto& [k, w] : nu.atoms()) {
            raw.dropped_mean_bound += w * powers[static_cast<std::size_t>(k - 1)].dropped_mean_bound();
        }
        return LatticePmf::from_raw(std::move(raw));
    }

    const std::int64_t out_lo = std::max<std::int64_t>(lo - shift, 0);
    const std::int64_t out_hi = std::max<std::int64_t>(hi - shift, 0);
    raw.base = out_lo;
    raw.mass.assign(static_cast<std::size_t>(out_hi - out_lo + 1), 0.0);

    double dropped = 0.0;
    double bound = 0.0;
    bool trimmed = false;
    for (const auto& [k, w] : nu.atoms()) {
        const LatticePmf& piece = powers[static_cast<std::size_t>(k - 1)];
        dropped += w * piece.dropped();
        bound += w * piece.dropped_mean_bound();
        trimmed = trimmed || piece.underflow_trimmed();
        piece.for_each_atom([&](std::int64_t idx, double m) {
            std::int64_t out = std::max<std::int64_t>(idx - shift, 0) - out_lo;
            raw.mass[static_cast<std::size_t>(out)] += w * m;
        });
    }
    raw.dropped = dropped;
    raw.dropped_mean_bound = bound;
    raw.underflow_trimmed = trimmed;
    return LatticePmf::from_raw(std::move(raw));
}

LatticePmf renormalized(const LatticePmf& pmf, double max_drift) {
    if (pmf.empty()) return pmf;
    double total = pmf.total_mass();
    double want = 1.0 - pmf.dropped();
    if (total <= 0.0 || want <= 0.0) return pmf;
    double drift = std::fabs(total - want);
    if (drift > max_drift) {
        throw std::logic_error("renormalized: mass drift " + std::to_string(drift) +
                               " exceeds the rounding allowance");
    }
    if (drift == 0.0) return pmf;
    LatticePmf::Raw raw;
    raw.step_den = pmf.step_den();
    raw.base = pmf.min_index();
    raw.mass.resize(static_cast<std::size_t>(pmf.max_index() - pmf.min_index()) + 1, 0.0);
    double scale = want / total;
    pmf.for_each_atom([&](std::int64_t k, double m) {
        raw.mass[static_cast<std::size_t>(k - pmf.min_index())] = m * scale;
    });
    raw.dropped = pmf.dropped();
    raw.dropped_mean_bound = pmf.dropped_mean_bound();
    raw.underflow_trimmed = pmf.underflow_trimmed();
    return LatticePmf::from_raw(std::move(raw));
}

LatticePmf truncate(const LatticePmf& pmf, double budget) {
    if (!(budget > 0.0)) throw ValidationError("truncate: budget must be positive");
    if (pmf.empty()) return pmf;

    const double h = pmf.step();
    std::vector<double> mass(static_cast<std::size_t>(pmf.max_index() - pmf.min_index()) + 1, 0.0);
    pmf.for_each_atom([&](std::int64_t k, double m) { mass[static_cast<std::size_t>(k - pmf.min_index())] = m; });

    double removed = 0.0;
    double removed_mean = 0.0;
    std::size_t i = mass.size();
    while (i-- > 0) {
        std::int64_t idx = pmf.min_index() + static_cast<std::int64_t>(i);
        if (idx == 0) break;  // the zero atom stays
        double m = mass[i];
        if (m == 0.0) continue;
        if (removed + m > budget) break;
        removed += m;
        removed_mean += m * static_cast<double>(idx) * h;
        mass[i] = 0.0;
    }

    LatticePmf::Raw raw;
    raw.step_den = pmf.step_den();
    raw.base = pmf.min_index();
    raw.mass = std::move(mass);
    raw.dropped = pmf.dropped() + removed;
    raw.dropped_mean_bound = pmf.dropped_mean_bound() + removed_mean;
    raw.underflow_trimmed = pmf.underflow_trimmed();
    return LatticePmf::from_raw(std::move(raw));
}

}  // namespace dr
