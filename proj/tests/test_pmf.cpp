#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "drlab/pmf.hpp"
#include "drlab/rng.hpp"
#include "drlab/util.hpp"
#include "oracle.hpp"

using namespace dr;

namespace {

LatticePmf bernoulli_initial(double p, std::int64_t y = 2) {
    ModelSpec spec{OffspringLaw::deterministic(2), LatticePmf::delta(y), p, std::nullopt};
    return make_initial(spec);
}

bool close_map(const LatticePmf& pmf, const std::map<std::int64_t, double>& want, double tol = 1e-12) {
    for (const auto& [k, m] : want) {
        if (std::fabs(pmf.mass_at(k) - m) > tol) return false;
    }
    double total = 0.0;
    for (const auto& [k, m] : want) total += m;
    return std::fabs(pmf.total_mass() - total) < tol;
}

// CDF comparison: a dominates b when P(a >= t) >= P(b >= t) for all lattice t.
bool dominates(const LatticePmf& a, const LatticePmf& b) {
    std::int64_t hi = std::max(a.max_index(), b.max_index());
    for (std::int64_t t = 0; t <= hi; ++t) {
        double ta = a.tail(static_cast<double>(t) * a.step());
        double tb = b.tail(static_cast<double>(t) * b.step());
        if (ta < tb - 1e-12) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("make_initial mixes the zero atom with Y0") {
    CHECK(close_map(bernoulli_initial(0.0), {{0, 1.0}}));
    CHECK(close_map(bernoulli_initial(1.0), {{2, 1.0}}));
    CHECK(close_map(bernoulli_initial(0.2), {{0, 0.8}, {2, 0.2}}));
}

TEST_CASE("make_initial rejects invalid specs") {
    ModelSpec bad_p{OffspringLaw::deterministic(2), LatticePmf::delta(2), 1.5, std::nullopt};
    CHECK_THROWS_AS(make_initial(bad_p), ValidationError);
    ModelSpec zero_y0{OffspringLaw::deterministic(2),
                      LatticePmf::from_masses({{0, 0.5}, {2, 0.5}}), 0.3, std::nullopt};
    CHECK_THROWS_AS(make_initial(zero_y0), ValidationError);
}

TEST_CASE("convolve basics") {
    LatticePmf q = bernoulli_initial(0.2);
    SUBCASE("delta_0 is the identity") {
        LatticePmf r = convolve(LatticePmf::delta(0), q);
        CHECK(close_map(r, {{0, 0.8}, {2, 0.2}}));
    }
    SUBCASE("two-atom square") {
        LatticePmf r = convolve(q, q);
        CHECK(close_map(r, {{0, 0.64}, {2, 0.32}, {4, 0.04}}));
    }
    SUBCASE("point masses add") {
        LatticePmf r = convolve(LatticePmf::delta(2), LatticePmf::delta(3));
        CHECK(close_map(r, {{5, 1.0}}));
    }
    SUBCASE("mismatched steps rejected") {
        CHECK_THROWS_AS(convolve(q, LatticePmf::delta(1, 2)), ValidationError);
    }
}

TEST_CASE("dr_step frozen examples") {
    OffspringLaw nu2 = OffspringLaw::deterministic(2);
    SUBCASE("half-half input") {
        LatticePmf in = LatticePmf::from_masses({{0, 0.5}, {2, 0.5}});
        LatticePmf out = dr_step(in, nu2);
        CHECK(close_map(out, {{0, 0.25}, {1, 0.5}, {3, 0.25}}));
        CHECK(out.mean() == doctest::Approx(1.25).epsilon(1e-12));
    }
    SUBCASE("deterministic 2+2-1") {
        CHECK(close_map(dr_step(LatticePmf::delta(2), nu2), {{3, 1.0}}));
    }
    SUBCASE("zero is absorbing") {
        for (const auto& nu : {nu2, OffspringLaw::uniform({1, 3}), OffspringLaw::uniform({1, 2, 3})}) {
            CHECK(close_map(dr_step(LatticePmf::delta(0), nu), {{0, 1.0}}));
        }
    }
}

TEST_CASE("dr_step on a refined lattice shifts by a full unit") {
    // h = 1/2, atoms at 3/2: (3/2 + 3/2 - 1)^+ = 2 -> index 4
    LatticePmf in = LatticePmf::delta(3, 2);
    LatticePmf out = dr_step(in, OffspringLaw::deterministic(2));
    CHECK(out.mass_at(4) == doctest::Approx(1.0));
    CHECK(out.step_den() == 2);
}

TEST_CASE("truncate") {
    SUBCASE("tiny budget leaves the pmf unchanged") {
        LatticePmf in = LatticePmf::from_masses({{0, 0.5}, {2, 0.5}});
        LatticePmf out = truncate(in, 1e-9);
        CHECK(close_map(out, {{0, 0.5}, {2, 0.5}}));
        CHECK(out.dropped() == 0.0);
        CHECK(out.dropped_mean_bound() == 0.0);
    }
    SUBCASE("removes the tail atom and charges the ledger") {
        LatticePmf in = LatticePmf::from_masses({{0, 0.9}, {10, 0.1}});
        LatticePmf out = truncate(in, 0.2);
        CHECK(close_map(out, {{0, 0.9}}, 1e-15));
        CHECK(out.dropped() == doctest::Approx(0.1));
        CHECK(out.dropped_mean_bound() == doctest::Approx(1.0));
        CHECK(dominates(in, out));
    }
    SUBCASE("budget above total mass keeps only the zero atom") {
        LatticePmf in = LatticePmf::from_masses({{0, 0.3}, {1, 0.3}, {5, 0.4}});
        LatticePmf out = truncate(in, 2.0);
        CHECK(out.total_mass() == doctest::Approx(0.3));
        CHECK(out.dropped() == doctest::Approx(0.7));
    }
}

TEST_CASE("moment and generating-function queries") {
    CHECK(LatticePmf::delta(0).mean() == 0.0);
    LatticePmf q = bernoulli_initial(0.2);
    for (double s : {0.5, 1.0, 1.5, 3.0}) {
        CHECK(q.gf(s) == doctest::Approx(0.8 + 0.2 * s * s).epsilon(1e-14));
        CHECK(q.gf_deriv(s) == doctest::Approx(2.0 * 0.2 * s).epsilon(1e-14));
    }
    CHECK(q.gf(0.0) == doctest::Approx(0.8));
    LatticePmf tri = LatticePmf::from_masses({{0, 0.25}, {1, 0.5}, {3, 0.25}});
    CHECK(tri.mean() == doctest::Approx(1.25));
    CHECK(tri.tail(1.0) == doctest::Approx(0.75));
    CHECK(tri.tail(2.5) == doctest::Approx(0.25));
}

TEST_CASE("mass conservation through dr_step") {
    Rng rng(7, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<std::int64_t, double> masses;
        double left = 1.0;
        for (int a = 0; a < 4; ++a) {
            double m = trial % 2 == 0 ? left * rng.next_double() : left * 0.3;
            masses[static_cast<std::int64_t>(rng.next_u64() % 7)] += m;
            left -= m;
        }
        masses[0] += left;
        LatticePmf pmf = LatticePmf::from_masses(masses);
        OffspringLaw nu = trial % 3 == 0 ? OffspringLaw::uniform({1, 2, 3})
                                         : OffspringLaw::deterministic(2);
        LatticePmf out = dr_step(pmf, nu);
        CHECK(std::fabs(out.total_mass() + out.dropped() - 1.0) < 1e-12);
        out.validate();
    }
}

TEST_CASE("stochastic monotonicity of the map") {
    Rng rng(11, 0);
    OffspringLaw nu = OffspringLaw::uniform({1, 2});
    for (int trial = 0; trial < 30; ++trial) {
        // b, then a = b with some mass pushed upward
        double m0 = 0.3 + 0.4 * rng.next_double();
        double m2 = 1.0 - m0;
        LatticePmf b = LatticePmf::from_masses({{0, m0}, {2, m2}});
        double moved = m0 * rng.next_double();
        LatticePmf a = LatticePmf::from_masses({{0, m0 - moved}, {2, m2}, {3, moved}});
        REQUIRE(dominates(a, b));
        CHECK(dominates(dr_step(a, nu), dr_step(b, nu)));
    }
}

TEST_CASE("oracle equivalence on small models") {
    struct Config {
        OffspringLaw nu;
        std::map<std::int64_t, double> y0;
        double p;
    };
    std::vector<Config> configs = {
        {OffspringLaw::deterministic(2), {{2, 1.0}}, 0.2},
        {OffspringLaw::uniform({1, 2}), {{1, 0.5}, {3, 0.5}}, 0.7},
        {OffspringLaw::uniform({1, 3}), {{2, 1.0}}, 0.35},
        {OffspringLaw::uniform({1, 2, 3}), {{1, 0.25}, {2, 0.5}, {3, 0.25}}, 0.5},
    };
    for (const auto& cfg : configs) {
        ModelSpec spec{cfg.nu, LatticePmf::from_masses(cfg.y0), cfg.p, std::nullopt};
        LatticePmf cur = make_initial(spec);
        for (int n = 0; n <= 4; ++n) {
            oracle::Law want = oracle::law_double(spec, n);
            for (const auto& [k, m] : want) {
                CHECK(cur.mass_at(k) == doctest::Approx(m).epsilon(1e-12));
            }
            CHECK(cur.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
            if (n < 4) cur = dr_step(cur, spec.nu);
        }
    }
}

TEST_CASE("randomized oracle equivalence") {
    // Random models within the small-support envelope, float engine vs the
    // tuple oracle.
    Rng rng(2024, 0);
    for (int trial = 0; trial < 30; ++trial) {
        std::map<int, double> nu_probs;
        int nu_atoms = 1 + static_cast<int>(rng.next_u64() % 3);
        double left = 1.0;
        for (int i = 0; i < nu_atoms; ++i) {
            int k = 1 + static_cast<int>(rng.next_u64() % 3);
            double q = i + 1 == nu_atoms ? left : left * rng.next_double();
            nu_probs[k] += q;
            left -= q;
        }
        OffspringLaw nu;
        try {
            nu = OffspringLaw::from_probs(nu_probs);
        } catch (const ValidationError&) {
            continue;  // mean fell at or below 1
        }
        std::map<std::int64_t, double> y0;
        int y_atoms = 1 + static_cast<int>(rng.next_u64() % 3);
        left = 1.0;
        for (int i = 0; i < y_atoms; ++i) {
            std::int64_t v = 1 + static_cast<std::int64_t>(rng.next_u64() % 3);
            double q = i + 1 == y_atoms ? left : left * rng.next_double();
            y0[v] += q;
            left -= q;
        }
        ModelSpec spec{nu, LatticePmf::from_masses(y0), rng.next_double(), std::nullopt};
        LatticePmf cur = make_initial(spec);
        for (int n = 0; n <= 4; ++n) {
            oracle::Law want = oracle::law_double(spec, n);
            for (const auto& [k, m] : want) {
                REQUIRE(cur.mass_at(k) == doctest::Approx(m).epsilon(1e-12));
            }
            if (n < 4) cur = dr_step(cur, spec.nu);
        }
    }
}

TEST_CASE("truncation soundness against the oracle") {
    ModelSpec spec{OffspringLaw::uniform({1, 2}), LatticePmf::from_masses({{1, 0.5}, {3, 0.5}}),
                   0.6, std::nullopt};
    LatticePmf cur = make_initial(spec);
    for (int n = 1; n <= 4; ++n) {
        cur = dr_step(cur, spec.nu);
        cur = truncate(cur, 0.01);
        double exact_mean = oracle::mean_of(oracle::law_double(spec, n));
        CHECK(cur.mean() <= exact_mean + 1e-12);
        CHECK(cur.mean() + cur.dropped_mean_bound() >= exact_mean - 1e-12);
    }
}

TEST_CASE("direct and transform convolutions agree") {
    std::map<std::int64_t, double> masses;
    Rng rng(13, 0);
    double total = 0.0;
    for (std::int64_t k = 0; k < 700; ++k) {
        double m = std::exp(-0.01 * static_cast<double>(k)) * (0.5 + rng.next_double());
        masses[k] = m;
        total += m;
    }
    for (auto& [k, m] : masses) m /= total;
    LatticePmf pmf = LatticePmf::from_masses(masses);

    ConvPolicy direct;
    direct.allow_fft = false;
    ConvPolicy fft;
    fft.allow_fft = true;
    fft.fft_threshold = 1;
    LatticePmf a = convolve(pmf, pmf, direct);
    LatticePmf b = convolve(pmf, pmf, fft);
    for (std::int64_t k = a.min_index(); k <= a.max_index(); ++k) {
        CHECK(std::fabs(a.mass_at(k) - b.mass_at(k)) < 1e-10);
    }
}

TEST_CASE("json round trip matches the pinned shape") {
    LatticePmf q = bernoulli_initial(0.2);
    nlohmann::json j = q.to_json();
    CHECK(j["step"] == "1/1");
    CHECK(j["masses"]["0"] == doctest::Approx(0.8));
    CHECK(j["masses"]["2"] == doctest::Approx(0.2));
    CHECK(j["dropped"] == 0.0);
    CHECK(j["dropped_mean_bound"] == 0.0);
    LatticePmf back = LatticePmf::from_json(j);
    CHECK(close_map(back, {{0, 0.8}, {2, 0.2}}));
}

TEST_CASE("offspring law invariants") {
    CHECK_THROWS_AS(OffspringLaw::deterministic(1), ValidationError);  // m must exceed 1
    CHECK_THROWS_AS(OffspringLaw::from_probs({{0, 0.5}, {2, 0.5}}), ValidationError);
    CHECK_THROWS_AS(OffspringLaw::from_probs({{2, 0.7}}), ValidationError);
    OffspringLaw nu = OffspringLaw::uniform({1, 3});
    CHECK(nu.mean() == doctest::Approx(2.0));
    CHECK(nu.gf(1.0) == doctest::Approx(1.0));
    CHECK(nu.gf_deriv(1.0) == doctest::Approx(2.0));
    // nu = 2 a.s.: h(1+a)-1 = 2a + a^2, so c0_prime is exactly 1/2.
    CHECK(OffspringLaw::deterministic(2).c0_prime(0.8) == doctest::Approx(0.5));
}
