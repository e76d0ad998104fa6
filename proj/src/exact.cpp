#include "drlab/exact.hpp"

#include <algorithm>

#include "drlab/util.hpp"

namespace dr {

double ExactPmf::mass_at(std::size_t k) const {
    if (k >= num.size()) return 0.0;
    return num[k].to_double() / den.to_double();
}

LatticePmf ExactPmf::to_pmf() const {
    LatticePmf::Raw raw;
    raw.step_den = 1;
    raw.base = 0;
    raw.mass.resize(num.size());
    const double d = den.to_double();
    for (std::size_t k = 0; k < num.size(); ++k) raw.mass[k] = num[k].to_double() / d;
    return LatticePmf::from_raw(std::move(raw));
}

BigUint ExactPmf::mean_num() const {
    BigUint acc(0);
    for (std::size_t k = 0; k < num.size(); ++k) {
        acc += num[k] * BigUint(k);
    }
    return acc;
}

ExactOffspring ExactOffspring::from_weights(const std::map<int, std::uint64_t>& w) {
    ExactOffspring out;
    std::uint64_t total = 0;
    for (const auto& [k, weight] : w) {
        if (k < 1) throw ValidationError("offspring weights: support must be in {1,2,...}");
        if (weight == 0) continue;
        out.weights.emplace_back(k, BigUint(weight));
        total += weight;
    }
    if (out.weights.empty()) throw ValidationError("offspring weights: empty");
    out.den = BigUint(total);
    return out;
}

OffspringLaw ExactOffspring::to_law() const {
    std::map<int, double> probs;
    const double d = den.to_double();
    for (const auto& [k, w] : weights) probs[k] = w.to_double() / d;
    return OffspringLaw::from_probs(probs);
}

ExactPmf exact_initial(std::uint64_t p_num, std::uint64_t p_den,
                       const std::map<int, std::uint64_t>& y0_weights) {
    if (p_den == 0 || p_num > p_den) throw ValidationError("exact_initial: p out of [0,1]");
    std::uint64_t y_total = 0;
    int y_max = 0;
    for (const auto& [k, w] : y0_weights) {
        if (k < 1) throw ValidationError("exact_initial: Y0 support must be positive");
        y_total += w;
        if (w > 0) y_max = std::max(y_max, k);
    }
    if (y_total == 0) throw ValidationError("exact_initial: empty Y0");

    ExactPmf out;
    out.den = BigUint(p_den) * BigUint(y_total);
    out.num.assign(static_cast<std::size_t>(y_max) + 1, BigUint(0));
    out.num[0] = BigUint(p_den - p_num) * BigUint(y_total);
    for (const auto& [k, w] : y0_weights) {
        if (w > 0) out.num[static_cast<std::size_t>(k)] += BigUint(p_num) * BigUint(w);
    }
    return out;
}

ExactPmf exact_convolve(const ExactPmf& a, const ExactPmf& b) {
    ExactPmf out;
    out.den = a.den * b.den;
    out.num.assign(a.num.size() + b.num.size() - 1, BigUint(0));
    for (std::size_t i = 0; i < a.num.size(); ++i) {
        if (a.num[i].is_zero()) continue;
        for (std::size_t j = 0; j < b.num.size(); ++j) {
            if (b.num[j].is_zero()) continue;
            out.num[i + j] += a.num[i] * b.num[j];
        }
    }
    return out;
}

ExactPmf exact_dr_step(const ExactPmf& pmf, const ExactOffspring& nu) {
    const int kmax = nu.max_k();
    std::vector<ExactPmf> powers;
    powers.reserve(static_cast<std::size_t>(kmax));
    powers.push_back(pmf);
    for (int k = 2; k <= kmax; ++k) powers.push_back(exact_convolve(powers.back(), pmf));

    // Common denominator nu.den * pmf.den^kmax; scale each piece up.
    ExactPmf sum;
    sum.den = nu.den * pmf.den.pow(static_cast<unsigned>(kmax));
    std::size_t width = powers.back().num.size();
    sum.num.assign(width, BigUint(0));
    for (const auto& [k, w] : nu.weights) {
        const ExactPmf& piece = powers[static_cast<std::size_t>(k - 1)];
        BigUint scale = w * pmf.den.pow(static_cast<unsigned>(kmax - k));
        for (std::size_t i = 0; i < piece.num.size(); ++i) {
            if (!piece.num[i].is_zero()) sum.num[i] += scale * piece.num[i];
        }
    }

    // (S - 1)^+ : indices 0 and 1 collapse onto 0.
    ExactPmf out;
    out.den = sum.den;
    out.num.assign(std::max<std::size_t>(width > 1 ? width - 1 : 1, 1), BigUint(0));
    for (std::size_t i = 0; i < width; ++i) {
        std::size_t target = i <= 1 ? 0 : i - 1;
        out.num[target] += sum.num[i];
    }
    while (out.num.size() > 1 && out.num.back().is_zero()) out.num.pop_back();
    return out;
}

bool exact_equal(const ExactPmf& a, const ExactPmf& b) {
    std::size_t n = std::max(a.num.size(), b.num.size());
    for (std::size_t k = 0; k < n; ++k) {
        BigUint lhs = (k < a.num.size() ? a.num[k] : BigUint(0)) * b.den;
        BigUint rhs = (k < b.num.size() ? b.num[k] : BigUint(0)) * a.den;
        if (lhs != rhs) return false;
    }
    return true;
}

}  // namespace dr
