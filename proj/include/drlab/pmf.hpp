#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dr {

// Finite sub-probability mass function on the lattice {0, h, 2h, ...} with
// h = 1/step_den. `dropped` is the mass removed by truncation over the pmf's
// whole history; `dropped_mean_bound` is a certified upper bound on the
// expectation contribution lost by those truncations, compounded through
// later map steps. Invariant: mass >= 0, total + dropped ~ 1, and
// dropped == 0 implies dropped_mean_bound == 0.
class LatticePmf {
public:
    LatticePmf() = default;

    static LatticePmf delta(std::int64_t index, std::uint32_t step_den = 1);
    static LatticePmf from_masses(const std::map<std::int64_t, double>& masses,
                                  std::uint32_t step_den = 1);

    std::uint32_t step_den() const { return step_den_; }
    double step() const { return 1.0 / step_den_; }

    // Support in lattice units; value(k) = k * step().
    std::int64_t min_index() const { return base_; }
    std::int64_t max_index() const { return base_ + static_cast<std::int64_t>(mass_.size()) - 1; }
    bool empty() const { return mass_.empty(); }
    std::size_t support_size() const;

    double mass_at(std::int64_t index) const;
    double zero_mass() const { return mass_at(0); }
    void for_each_atom(const std::function<void(std::int64_t, double)>& fn) const;

    double total_mass() const;
    double dropped() const { return dropped_; }
    double dropped_mean_bound() const { return dropped_mean_bound_; }

    // Kept-mass mean: a certified lower bound on the exact mean whenever
    // dropped > 0; mean_upper() is the matching certified upper bound.
    double mean() const;
    double mean_upper() const { return mean() + dropped_mean_bound_; }
    double tail(double t) const;  // P(X >= t)
    double gf(double s) const;        // E s^X over kept mass, s >= 0
    double gf_deriv(double s) const;  // d/ds E s^X over kept mass
    // E[s^X] - total_mass, summed without forming 1 + tiny; keeps a_n = G_n - 1
    // meaningful when it sits far below machine epsilon.
    double gf_minus_one(double s) const;

    void validate() const;  // throws ValidationError on broken invariants

    nlohmann::json to_json() const;
    static LatticePmf from_json(const nlohmann::json& j);

    // Construction hooks for the operations below.
    struct Raw {
        std::int64_t base = 0;
        std::vector<double> mass;
        std::uint32_t step_den = 1;
        double dropped = 0.0;
        double dropped_mean_bound = 0.0;
        bool underflow_trimmed = false;
    };
    static LatticePmf from_raw(Raw raw);
    // True if some convolution product underflowed to zero; the far tail is
    // then missing below ~1e-308 per atom.
    bool underflow_trimmed() const { return underflow_trimmed_; }

private:
    void trim();

    std::int64_t base_ = 0;           // lattice index of mass_[0]
    std::vector<double> mass_;        // dense from base_
    std::uint32_t step_den_ = 1;
    double dropped_ = 0.0;
    double dropped_mean_bound_ = 0.0;
    bool underflow_trimmed_ = false;
};

// Offspring law on {1, 2, ...} with finite support and mean m > 1.
class OffspringLaw {
public:
    OffspringLaw() = default;
    static OffspringLaw deterministic(int k);
    static OffspringLaw from_probs(const std::map<int, double>& probs);
    static OffspringLaw uniform(const std::vector<int>& ks);

    const std::vector<std::pair<int, double>>& atoms() const { return atoms_; }
    double mean() const { return mean_; }
    int max_k() const { return atoms_.empty() ? 0 : atoms_.back().first; }
    bool is_deterministic() const { return atoms_.size() == 1; }

    double gf(double x) const;        // h(x) = E x^nu
    double gf_deriv(double x) const;  // h'(x)
    // h(1 + a) - 1 and h(x) - 1, cancellation-free near 0 and 1.
    double gf_1p_minus_one(double a) const;
    double gf_minus_one(double x) const;

    // Exact polynomial bounds on [0, a_max]:
    //   h(1+a) - 1 <= m a (1 + c0_prime(a_max) a)
    //   h'(1+a)    <= m + c0(a_max) a
    double c0_prime(double a_max) const;
    double c0(double a_max) const;

    // Size-biased child count: P(k) -> k P(k) / m.
    std::vector<std::pair<int, double>> size_biased() const;

private:
    std::vector<std::pair<int, double>> atoms_;  // sorted by k
    double mean_ = 0.0;
};

struct TailMeta {
    enum class Kind { exponential, critical };
    Kind kind = Kind::exponential;
    double param = 0.0;  // theta for exponential, alpha for critical
};

// Initial condition (1-p) delta_0 + p * law(Y0) together with the offspring law.
struct ModelSpec {
    OffspringLaw nu;
    LatticePmf y0;  // strictly positive support, probability mass 1
    double p = 0.0;
    std::optional<TailMeta> tail;

    void validate() const;
};

// --- pmf operations -------------------------------------------------------

struct ConvPolicy {
    bool allow_fft = true;
    // Switch to the transform path once len(a)*len(b) exceeds this.
    std::size_t fft_threshold = std::size_t{1} << 21;
};

LatticePmf make_initial(const ModelSpec& spec);

// Law of the independent sum. Lattice steps must match. Dropped mass and the
// mean bound combine so the certified interval stays sound.
LatticePmf convolve(const LatticePmf& a, const LatticePmf& b, const ConvPolicy& policy = {});

// One step of the map: law of (X_1 + ... + X_nu - 1)^+ for iid X_i ~ pmf.
LatticePmf dr_step(const LatticePmf& pmf, const OffspringLaw& nu, const ConvPolicy& policy = {});

// Remove upper-tail atoms of total mass <= budget (never the zero atom),
// charging their mean contribution to dropped_mean_bound. The result is
// stochastically dominated by the input.
LatticePmf truncate(const LatticePmf& pmf, double budget);

// Rescale the kept mass to exactly 1 - dropped. The map multiplies total-mass
// rounding drift by m every step, so deep iterations must pin the mass
// manifold or the drift eventually swamps the distribution. Throws when the
// drift is already beyond `max_drift` (an accounting bug, not rounding).
LatticePmf renormalized(const LatticePmf& pmf, double max_drift = 1e-9);

}  // namespace dr
