#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drlab/pmf.hpp"
#include "drlab/rng.hpp"

namespace dr {

// Reversed branching tree: the root sits at generation `depth`, every vertex
// at generation i >= 1 draws its parent count from the offspring law, and the
// initial generation 0 carries the leaves.
struct GwTree {
    struct Vertex {
        std::uint32_t parent_begin = 0;  // into gens[i-1]
        std::uint32_t parent_count = 0;
        std::uint32_t child = 0;  // into gens[i+1]; unused for the root
    };
    int depth = 0;
    std::vector<std::vector<Vertex>> gens;  // gens[i] = generation i

    std::size_t leaf_count() const { return gens.front().size(); }
    std::size_t vertex_count() const;
};

GwTree sample_gw_tree(const OffspringLaw& nu, int n, Rng& rng,
                      std::size_t vertex_budget = std::size_t{1} << 24);

// Draw from the initial mixture (1-p) delta_0 + p Y0.
class InitialSampler {
public:
    explicit InitialSampler(const ModelSpec& spec);
    double draw(Rng& rng) const;

private:
    double p_;
    std::vector<double> values_;
    std::vector<double> cdf_;
};

// X values for every vertex, leaves filled from the sampler, inner vertices
// by (sum of parents - 1)^+. out[i][v] matches tree.gens[i][v].
std::vector<std::vector<double>> evaluate_recursion_on_tree(const GwTree& tree,
                                                            const InitialSampler& x0,
                                                            Rng& rng);

// Leaf count of a plain branching process run down `depth` generations.
std::uint64_t gw_leaf_count(const OffspringLaw& nu, int depth, Rng& rng,
                            std::size_t vertex_budget = std::size_t{1} << 24);

// Size-biased spine: per level i in 0..n-1, the brother count of the spine
// vertex and the leaf counts of the subtrees hanging off those brothers.
struct SpineLevel {
    int bro_count = 0;
    std::vector<std::uint64_t> bro_leaves;
    std::uint64_t lambda = 0;  // sum of bro_leaves
};

struct SpineSample {
    int n = 0;
    std::vector<SpineLevel> levels;
    // Leaves below spine vertex i: 1 + sum_{j<i} lambda_j.
    std::uint64_t t0_below(int i) const;
};

SpineSample sample_spine(const OffspringLaw& nu, int n, Rng& rng,
                         std::size_t vertex_budget = std::size_t{1} << 24);

// --- path functionals for the many-to-one identity --------------------------

// Per-vertex subtree leaf counts plus leaf chains, precomputed per tree.
struct TreeView {
    const GwTree* tree = nullptr;
    std::vector<std::vector<std::uint64_t>> t0;  // t0[i][v]

    static TreeView build(const GwTree& tree);
    // Vertex index of u_j (the generation-j descendant of leaf u).
    std::uint32_t chain(std::size_t leaf, int j) const;
    // Lambda(u_j) = #T0(child) - #T0(u_j); 0 at the root.
    std::uint64_t lambda_at(std::size_t leaf, int j) const;
};

class PathFunctional {
public:
    virtual ~PathFunctional() = default;
    virtual std::string name() const = 0;
    virtual double eval_leaf(const TreeView& view, std::size_t leaf) const = 0;
    virtual double eval_spine(const SpineSample& spine) const = 0;
};

// g = 1, g = #T0(u_level), g = 1{Lambda(u_level) = 0}.
const PathFunctional& functional_ones();
const PathFunctional& functional_leaf_count(int level);
const PathFunctional& functional_lambda_zero(int level);

struct MtoResult {
    double lhs_mc = 0.0, lhs_se = 0.0;  // E[sum over leaves of g]
    double rhs_mc = 0.0, rhs_se = 0.0;  // m^n * E_Q[g(spine)]
    double lhs_enum = 0.0, rhs_enum = 0.0;
    bool enum_available = false;
    std::vector<double> lhs_samples, rhs_samples;  // per-trial values
};

MtoResult many_to_one_check(const PathFunctional& g, const OffspringLaw& nu, int n, int trials,
                            std::uint64_t seed, std::size_t vertex_budget = std::size_t{1} << 24);

// Exhaustive enumeration over tree shapes / spine configurations. Feasible for
// n <= 3 with small offspring support; throws BudgetError beyond `max_shapes`.
double enumerate_tree_expectation(const PathFunctional& g, const OffspringLaw& nu, int n,
                                  std::size_t max_shapes = 2'000'000);
double enumerate_spine_expectation(const PathFunctional& g, const OffspringLaw& nu, int n,
                                   std::size_t max_configs = 2'000'000);

// --- spine moments, Z statistic, martingale ---------------------------------

struct SpineMoments {
    double c10 = 0.0;
    std::vector<double> first, first_se;    // E_Q[#T0(e_i)]
    std::vector<double> second, second_se;  // E_Q[(#T0(e_i))^2]
    std::vector<double> expected_first;     // c10 (m^i - 1)/(m - 1) + 1
};

SpineMoments spine_subtree_moments(const OffspringLaw& nu, int n, int trials, std::uint64_t seed);

struct ZConfig {
    double lambda1 = 1.0 / 3.0;
    double lambda2 = 2.0 / 3.0;
    double b = 1.0;
    int n = 8;
};

struct ZResult {
    double p_z = 0.0;          // MC estimate of P(Z >= 1)
    double se = 0.0;
    double p_exact_tail = 0.0; // P(X_n >= b) from the pmf engine
    double mean_z = 0.0;
    int j_hi = 0;              // floor(lambda1 n)
    std::vector<double> z_samples;  // per-trial Z counts
};

ZResult z_statistic(const ModelSpec& spec, const ZConfig& cfg, int trials, std::uint64_t seed,
                    std::size_t vertex_budget = std::size_t{1} << 24);

struct WCheck {
    std::vector<double> mean, se, var;  // W_j = Z_j / m^j, j = 0..depth
};

WCheck martingale_w_check(const OffspringLaw& nu, int depth, int trials, std::uint64_t seed,
                          std::size_t vertex_budget = std::size_t{1} << 24);

// P(max leaf - n > b) estimates for each b.
std::vector<double> sample_max_leaf_exceed(const ModelSpec& spec, int n,
                                           std::span<const double> b_grid, int trials,
                                           std::uint64_t seed,
                                           std::size_t vertex_budget = std::size_t{1} << 24);

// Empirical law of the root value against an exact reference pmf.
struct TreeLawResult {
    double tv = 0.0;        // total variation distance
    double tv_gate = 0.0;   // 3 sigma-style acceptance gate for the sample size
    std::map<std::int64_t, double> hist;
};

TreeLawResult tree_law_check(const ModelSpec& spec, const LatticePmf& exact, int n, int trials,
                             std::uint64_t seed, std::size_t vertex_budget = std::size_t{1} << 24);

// Pearson test of the sampled brother-count law against k P(nu = k)/m.
struct ChiSquareResult {
    double stat = 0.0;
    int df = 0;
    double critical = 0.0;  // alpha = 0.001
    bool pass = false;
};

ChiSquareResult spine_brother_chisq(const OffspringLaw& nu, int trials, std::uint64_t seed);

}  // namespace dr
