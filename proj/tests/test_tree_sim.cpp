#include <doctest.h>

#include <cmath>

#include "drlab/recursion.hpp"
#include "drlab/tree_sim.hpp"
#include "drlab/util.hpp"

using namespace dr;

namespace {

ModelSpec bernoulli(double p) {
    return {OffspringLaw::deterministic(2), LatticePmf::delta(2), p, std::nullopt};
}

}  // namespace

TEST_CASE("binary trees have 2^n leaves") {
    Rng rng(1, 0);
    GwTree tree = sample_gw_tree(OffspringLaw::deterministic(2), 3, rng);
    CHECK(tree.leaf_count() == 8);
    CHECK(tree.vertex_count() == 15);
}

TEST_CASE("one draw decides the leaf count at depth 1") {
    OffspringLaw nu = OffspringLaw::uniform({1, 2});
    int ones = 0, twos = 0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        Rng rng(5, static_cast<std::uint64_t>(t));
        GwTree tree = sample_gw_tree(nu, 1, rng);
        if (tree.leaf_count() == 1) ++ones;
        else if (tree.leaf_count() == 2) ++twos;
    }
    CHECK(ones + twos == trials);
    double half = static_cast<double>(ones) / trials;
    CHECK(std::fabs(half - 0.5) < 3.0 * std::sqrt(0.25 / trials));
}

TEST_CASE("mean leaf count approaches m^n") {
    OffspringLaw nu = OffspringLaw::uniform({1, 3});
    const int n = 5, trials = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(9, static_cast<std::uint64_t>(t));
        double c = static_cast<double>(sample_gw_tree(nu, n, rng).leaf_count());
        sum += c;
        sumsq += c * c;
    }
    double mean = sum / trials;
    double se = std::sqrt((sumsq / trials - mean * mean) / trials);
    CHECK(std::fabs(mean - std::pow(2.0, n)) <= 3.0 * se);
}

TEST_CASE("tree evaluation edge cases") {
    SUBCASE("all-zero leaves give a zero root") {
        Rng rng(3, 0);
        GwTree tree = sample_gw_tree(OffspringLaw::uniform({1, 2, 3}), 4, rng);
        InitialSampler zeros(bernoulli(0.0));
        auto x = evaluate_recursion_on_tree(tree, zeros, rng);
        CHECK(x[4][0] == 0.0);
    }
    SUBCASE("two leaves at 2 give root 3") {
        Rng rng(4, 0);
        GwTree tree = sample_gw_tree(OffspringLaw::deterministic(2), 1, rng);
        InitialSampler twos(bernoulli(1.0));
        auto x = evaluate_recursion_on_tree(tree, twos, rng);
        CHECK(x[1][0] == 3.0);
    }
}

TEST_CASE("tree-evaluated law matches the pmf engine") {
    ModelSpec spec = bernoulli(0.3);
    IterateOptions opts;
    opts.n_max = 5;
    LatticePmf exact = iterate(spec, opts).final_pmf;
    TreeLawResult res = tree_law_check(spec, exact, 5, 100000, 21);
    CHECK(res.tv <= res.tv_gate);
}

TEST_CASE("spine brother counts") {
    SUBCASE("constant offspring has exactly one brother") {
        for (int t = 0; t < 50; ++t) {
            Rng rng(6, static_cast<std::uint64_t>(t));
            SpineSample s = sample_spine(OffspringLaw::deterministic(2), 6, rng);
            for (const auto& lvl : s.levels) CHECK(lvl.bro_count == 1);
            for (int i = 0; i <= 6; ++i) {
                CHECK(s.t0_below(i) == (std::uint64_t{1} << i));
            }
        }
    }
    SUBCASE("size-biased law for uniform {1,2}") {
        // Q(#bro = 0) = 1/3, Q(#bro = 1) = 2/3
        int zero = 0, one = 0;
        const int trials = 30000;
        for (int t = 0; t < trials; ++t) {
            Rng rng(8, static_cast<std::uint64_t>(t));
            SpineSample s = sample_spine(OffspringLaw::uniform({1, 2}), 1, rng);
            if (s.levels[0].bro_count == 0) ++zero;
            else ++one;
        }
        double frac = static_cast<double>(zero) / trials;
        CHECK(std::fabs(frac - 1.0 / 3.0) < 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / trials));
        CHECK(zero + one == trials);
    }
    SUBCASE("deterministic ternary spine subtree counts are 3^i") {
        Rng rng(10, 0);
        SpineSample s = sample_spine(OffspringLaw::deterministic(3), 4, rng);
        for (int i = 0; i <= 4; ++i) {
            CHECK(s.t0_below(i) == static_cast<std::uint64_t>(std::pow(3.0, i)));
        }
    }
}

TEST_CASE("chi-square on the spine brother law") {
    CHECK(spine_brother_chisq(OffspringLaw::uniform({1, 2}), 100000, 31).pass);
    CHECK(spine_brother_chisq(OffspringLaw::uniform({1, 3}), 100000, 32).pass);
}

TEST_CASE("many-to-one: enumeration equality and monte carlo agreement") {
    OffspringLaw nu = OffspringLaw::uniform({1, 2});
    for (const PathFunctional* g :
         {&functional_ones(), &functional_leaf_count(1), &functional_lambda_zero(1)}) {
        MtoResult r = many_to_one_check(*g, nu, 2, 60000, 41);
        REQUIRE(r.enum_available);
        CHECK(r.lhs_enum == doctest::Approx(r.rhs_enum).epsilon(1e-12));
        double combined = std::sqrt(r.lhs_se * r.lhs_se + r.rhs_se * r.rhs_se);
        CHECK(std::fabs(r.lhs_mc - r.rhs_mc) <= 3.0 * combined + 1e-12);
        CHECK(std::fabs(r.lhs_mc - r.lhs_enum) <= 3.0 * r.lhs_se + 1e-12);
    }
}

TEST_CASE("many-to-one with g = 1 recovers m^n exactly under enumeration") {
    MtoResult r = many_to_one_check(functional_ones(), OffspringLaw::uniform({1, 2}), 3, 2000, 43);
    REQUIRE(r.enum_available);
    CHECK(r.lhs_enum == doctest::Approx(std::pow(1.5, 3)).epsilon(1e-12));
    CHECK(r.rhs_enum == doctest::Approx(std::pow(1.5, 3)).epsilon(1e-12));
}

TEST_CASE("spine subtree moments match the closed form") {
    SUBCASE("deterministic ternary: c10 = 2 and first moments 3^i") {
        SpineMoments m = spine_subtree_moments(OffspringLaw::deterministic(3), 4, 200, 51);
        CHECK(m.c10 == doctest::Approx(2.0));
        for (int i = 0; i <= 4; ++i) {
            CHECK(m.expected_first[static_cast<std::size_t>(i)] ==
                  doctest::Approx(std::pow(3.0, i)));
            CHECK(m.first[static_cast<std::size_t>(i)] == doctest::Approx(std::pow(3.0, i)));
        }
    }
    SUBCASE("uniform {1,3} sampled moments within 3 sigma") {
        SpineMoments m = spine_subtree_moments(OffspringLaw::uniform({1, 3}), 4, 60000, 52);
        CHECK(m.c10 == doctest::Approx(1.5));
        for (int i = 0; i <= 4; ++i) {
            CHECK(std::fabs(m.first[static_cast<std::size_t>(i)] -
                            m.expected_first[static_cast<std::size_t>(i)]) <=
                  3.0 * m.first_se[static_cast<std::size_t>(i)] + 1e-12);
        }
        // second moments bounded by a fitted c12 m^{2i}
        double c12 = 0.0;
        for (int i = 0; i <= 4; ++i) {
            c12 = std::max(c12, m.second[static_cast<std::size_t>(i)] / std::pow(2.0, 2 * i));
        }
        CHECK(c12 < 10.0);
    }
}

TEST_CASE("z statistic against the exact tail") {
    SUBCASE("p = 0 gives zero on both sides") {
        ZConfig cfg;
        cfg.n = 6;
        cfg.b = 1.0;
        ZResult r = z_statistic(bernoulli(0.0), cfg, 4000, 61);
        CHECK(r.p_z == 0.0);
        CHECK(r.p_exact_tail == 0.0);
    }
    SUBCASE("unreachable threshold gives zero on both sides") {
        ZConfig cfg;
        cfg.n = 4;
        cfg.b = 64.0;  // above the max value 2 * 2^4
        ZResult r = z_statistic(bernoulli(0.6), cfg, 4000, 62);
        CHECK(r.p_z == 0.0);
        CHECK(r.p_exact_tail == 0.0);
    }
    SUBCASE("counting bound at n = 8") {
        ZConfig cfg;
        cfg.n = 8;
        for (double b : {1.0, 2.0, 3.0}) {
            cfg.b = b;
            ZResult r = z_statistic(bernoulli(0.3), cfg, 30000, 63);
            CHECK(r.p_z <= r.p_exact_tail + 3.0 * r.se + 1e-12);
        }
    }
    SUBCASE("wide initial values actually fire the statistic") {
        // Bounded-by-2 leaves can never satisfy the two-scale event; a wide
        // Y0 makes Z genuinely random while the counting bound must still hold.
        std::map<std::int64_t, double> wide;
        for (std::int64_t k = 1; k <= 12; ++k) wide[k] = 1.0 / 12.0;
        ModelSpec spec{OffspringLaw::deterministic(2), LatticePmf::from_masses(wide), 0.5,
                       std::nullopt};
        ZConfig cfg;
        cfg.n = 6;
        cfg.b = 1.0;
        ZResult r = z_statistic(spec, cfg, 30000, 64);
        CHECK(r.mean_z > 0.0);
        CHECK(r.p_z > 0.0);
        CHECK(r.p_z <= r.p_exact_tail + 3.0 * r.se + 1e-12);
    }
}

TEST_CASE("population martingale") {
    SUBCASE("deterministic offspring is constant") {
        WCheck w = martingale_w_check(OffspringLaw::deterministic(3), 5, 200, 71);
        for (double mean : w.mean) CHECK(mean == doctest::Approx(1.0));
        for (double var : w.var) CHECK(var == doctest::Approx(0.0));
    }
    SUBCASE("uniform {1,3} stays near 1 with bounded variance") {
        WCheck w = martingale_w_check(OffspringLaw::uniform({1, 3}), 10, 60000, 72);
        for (std::size_t j = 0; j < w.mean.size(); ++j) {
            CHECK(std::fabs(w.mean[j] - 1.0) <= 3.0 * w.se[j] + 1e-12);
        }
        // Var(W_infinity) = sigma^2 / (m^2 - m) = 1 / 2 for this law
        CHECK(w.var.back() < 0.75);
        CHECK(w.var[3] <= w.var.back() + 0.05);
    }
}

TEST_CASE("identical seeds reproduce identical results") {
    ZConfig cfg;
    cfg.n = 6;
    cfg.b = 2.0;
    ZResult a = z_statistic(bernoulli(0.4), cfg, 5000, 99);
    ZResult b = z_statistic(bernoulli(0.4), cfg, 5000, 99);
    CHECK(a.p_z == b.p_z);
    CHECK(a.mean_z == b.mean_z);
    MtoResult ma = many_to_one_check(functional_ones(), OffspringLaw::uniform({1, 2}), 4, 3000, 7);
    MtoResult mb = many_to_one_check(functional_ones(), OffspringLaw::uniform({1, 2}), 4, 3000, 7);
    CHECK(ma.lhs_mc == mb.lhs_mc);
    CHECK(ma.rhs_mc == mb.rhs_mc);
}

TEST_CASE("vertex budget refuses oversized simulations") {
    Rng rng(2, 0);
    CHECK_THROWS_AS(sample_gw_tree(OffspringLaw::deterministic(3), 14, rng, 10000), BudgetError);
}
