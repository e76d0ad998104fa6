#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "drlab/bigint.hpp"
#include "drlab/pmf.hpp"

namespace dr {

// Exact-rational counterpart of LatticePmf for the integer lattice: mass at k
// is num[k]/den with one shared denominator, so convolution and mixtures stay
// exact without any gcd reduction. Used by the oracle-grade tests at small n.
struct ExactPmf {
    std::vector<BigUint> num;  // index = lattice point, num[k]/den = P(X = k)
    BigUint den{1};

    double mass_at(std::size_t k) const;
    LatticePmf to_pmf() const;
    // Exact mean as a fraction (numerator over den).
    BigUint mean_num() const;
};

struct ExactOffspring {
    std::vector<std::pair<int, BigUint>> weights;  // k >= 1
    BigUint den{1};

    static ExactOffspring from_weights(const std::map<int, std::uint64_t>& w);
    OffspringLaw to_law() const;
    int max_k() const { return weights.empty() ? 0 : weights.back().first; }
};

// (1-p) delta_0 + p * Y0 with p = p_num/p_den and Y0 given by integer weights
// on {1, 2, ...}.
ExactPmf exact_initial(std::uint64_t p_num, std::uint64_t p_den,
                       const std::map<int, std::uint64_t>& y0_weights);

ExactPmf exact_convolve(const ExactPmf& a, const ExactPmf& b);

// Law of (X_1 + ... + X_nu - 1)^+, exact.
ExactPmf exact_dr_step(const ExactPmf& pmf, const ExactOffspring& nu);

// a == b as distributions (cross-multiplied, no normalisation needed).
bool exact_equal(const ExactPmf& a, const ExactPmf& b);

}  // namespace dr
