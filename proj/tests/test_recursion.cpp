#include <doctest.h>

#include <cmath>
#include <sstream>

#include "drlab/recursion.hpp"
#include "drlab/util.hpp"
#include "oracle.hpp"

using namespace dr;

namespace {

ModelSpec bernoulli(double p) {
    return {OffspringLaw::deterministic(2), LatticePmf::delta(2), p, std::nullopt};
}

}  // namespace

TEST_CASE("deterministic start follows the closed form 2^n + 1") {
    IterateOptions opts;
    opts.n_max = 10;
    IterateResult res = iterate(bernoulli(1.0), opts);
    for (int n = 0; n <= 10; ++n) {
        double want = n == 0 ? 2.0 : std::pow(2.0, n) + 1.0;
        CHECK(res.trace.rows[static_cast<std::size_t>(n)].mean_low == doctest::Approx(want).epsilon(1e-14));
        CHECK(res.trace.rows[static_cast<std::size_t>(n)].mean_high == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(res.trace.rows[1].mean_low == doctest::Approx(3.0));
    CHECK(res.trace.rows[2].mean_low == doctest::Approx(5.0));
    CHECK(res.trace.rows[3].mean_low == doctest::Approx(9.0));
}

TEST_CASE("p = 0 stays at zero") {
    IterateOptions opts;
    opts.n_max = 6;
    IterateResult res = iterate(bernoulli(0.0), opts);
    for (const TraceRow& row : res.trace.rows) {
        CHECK(row.mean_low == 0.0);
        CHECK(row.mean_high == 0.0);
        CHECK(row.zero_mass == 1.0);
    }
}

TEST_CASE("half mixture mean interval at n = 1") {
    IterateOptions opts;
    opts.n_max = 1;
    IterateResult res = iterate(bernoulli(0.5), opts);
    CHECK(res.trace.rows[1].mean_low <= 1.25);
    CHECK(res.trace.rows[1].mean_high >= 1.25);
    CHECK(res.trace.rows[1].mean_low == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("sandwich values from the deterministic closed form") {
    IterateOptions opts;
    opts.n_max = 3;
    IterateResult res = iterate(bernoulli(1.0), opts);
    auto [low, high] = free_energy_sandwich(res.trace, 3);
    CHECK(low == doctest::Approx(1.0).epsilon(1e-14));   // (9 - 1) / 8
    CHECK(high == doctest::Approx(9.0 / 8.0).epsilon(1e-14));
    CHECK_THROWS_AS(free_energy_sandwich(res.trace, 7), ValidationError);
}

TEST_CASE("p = 0 sandwich pins the free energy at zero") {
    IterateOptions opts;
    opts.n_max = 4;
    IterateResult res = iterate(bernoulli(0.0), opts);
    auto [low, high] = free_energy_sandwich(res.trace, 4);
    CHECK(low <= 0.0);
    CHECK(high == 0.0);
}

TEST_CASE("sandwich width shrinks like (1/(m-1))/m^n without truncation") {
    IterateOptions opts;
    opts.n_max = 8;
    IterateResult res = iterate(bernoulli(0.3), opts);
    for (int n = 1; n <= 8; ++n) {
        auto [low, high] = free_energy_sandwich(res.trace, n);
        CHECK(high - low == doctest::Approx(std::pow(2.0, -n)).epsilon(1e-9));
    }
}

TEST_CASE("mean growth inequalities on exact instances") {
    for (double p : {0.15, 0.4, 0.8}) {
        ModelSpec spec{OffspringLaw::uniform({1, 3}), LatticePmf::from_masses({{1, 0.5}, {2, 0.5}}),
                       p, std::nullopt};
        IterateOptions opts;
        opts.n_max = 6;
        IterateResult res = iterate(spec, opts);
        const double m = spec.nu.mean();
        for (int n = 0; n < 6; ++n) {
            double en = res.trace.rows[static_cast<std::size_t>(n)].mean_low;
            double en1 = res.trace.rows[static_cast<std::size_t>(n) + 1].mean_low;
            CHECK(en1 <= m * en + 1e-12);
            CHECK(en1 >= m * en - 1.0 - 1e-12);
        }
    }
}

TEST_CASE("means are monotone in p") {
    IterateOptions opts;
    opts.n_max = 5;
    double prev = -1.0;
    for (double p : {0.1, 0.2, 0.35, 0.6, 0.9}) {
        IterateResult res = iterate(bernoulli(p), opts);
        double mean5 = res.trace.rows[5].mean_low;
        CHECK(mean5 >= prev - 1e-12);
        prev = mean5;
    }
}

TEST_CASE("nested sandwich under truncation, up to the certified width") {
    ModelSpec spec = bernoulli(0.22);
    IterateOptions opts;
    opts.n_max = 25;
    opts.budget = 1e-6;
    IterateResult res = iterate(spec, opts);
    for (std::size_t i = 1; i < res.trace.rows.size(); ++i) {
        const TraceRow& a = res.trace.rows[i - 1];
        const TraceRow& b = res.trace.rows[i];
        CHECK(b.f_low_raw >= a.f_low_raw - b.trunc_width - 1e-12);
        CHECK(b.f_high <= a.f_high + b.trunc_width + 1e-12);
    }
}

TEST_CASE("free_energy drives the sandwich to tolerance") {
    SUBCASE("deterministic start converges to 1") {
        FreeEnergyOptions opts;
        opts.tol = 1e-6;
        opts.n_cap = 40;
        FreeEnergyResult r = free_energy(bernoulli(1.0), opts);
        CHECK(r.tol_reached);
        CHECK(r.low <= 1.0);
        CHECK(r.high >= 1.0);
        CHECK(r.width() <= 1e-6);
    }
    SUBCASE("p = 0 is exactly zero") {
        FreeEnergyOptions opts;
        opts.tol = 1e-9;
        FreeEnergyResult r = free_energy(bernoulli(0.0), opts);
        CHECK(r.low == 0.0);
        CHECK(r.high == 0.0);
        CHECK(r.tol_reached);
    }
    SUBCASE("half mixture encloses the depth-4 oracle value") {
        FreeEnergyOptions opts;
        opts.tol = 1e-3;
        opts.n_cap = 60;
        FreeEnergyResult r = free_energy(bernoulli(0.5), opts);
        CHECK(r.tol_reached);
        CHECK(r.low > 0.0);
        double e4 = oracle::mean_of(oracle::law_double(bernoulli(0.5), 4));
        double sandwich_low4 = (e4 - 1.0) / 16.0;
        double sandwich_high4 = e4 / 16.0;
        CHECK(r.low >= sandwich_low4 - 1e-12);
        CHECK(r.high <= sandwich_high4 + 1e-12);
    }
    SUBCASE("subcritical phase certifies a numerically zero value") {
        FreeEnergyOptions opts;
        opts.tol = 1e-6;
        opts.n_cap = 60;
        FreeEnergyResult r = free_energy(bernoulli(0.1), opts);
        CHECK(r.tol_reached);
        CHECK(r.low == 0.0);
        CHECK(r.high <= 1e-6);
    }
    SUBCASE("tolerance flag reported when the cap is too small") {
        FreeEnergyOptions opts;
        opts.tol = 1e-12;
        opts.n_cap = 3;
        FreeEnergyResult r = free_energy(bernoulli(0.5), opts);
        CHECK_FALSE(r.tol_reached);
        CHECK(r.flag == "tolerance not reached");
    }
}

TEST_CASE("refined lattice end to end") {
    // h = 1/2, Y0 = 3/2 deterministic: X_{n+1} = 2 X_n - 1 from X_0 = 3/2
    ModelSpec spec{OffspringLaw::deterministic(2), LatticePmf::delta(3, 2), 1.0, std::nullopt};
    IterateOptions opts;
    opts.n_max = 5;
    IterateResult res = iterate(spec, opts);
    double want = 1.5;
    for (int n = 0; n <= 5; ++n) {
        CHECK(res.trace.rows[static_cast<std::size_t>(n)].mean_low ==
              doctest::Approx(want).epsilon(1e-12));
        want = 2.0 * want - 1.0;
    }
}

TEST_CASE("trace csv carries the pinned columns") {
    IterateOptions opts;
    opts.n_max = 2;
    IterateResult res = iterate(bernoulli(0.2), opts);
    std::ostringstream os;
    write_trace_csv(os, res.trace);
    std::string text = os.str();
    CHECK(text.rfind("n,mean_low,mean_high,zero_mass,support_size,dropped,F_low,F_high\n", 0) == 0);
    int lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 4);
}

TEST_CASE("free_energy retries the budget when truncation dominates") {
    // A coarse budget starves the run early; the adaptive shrink must still
    // reach the tolerance.
    FreeEnergyOptions opts;
    opts.tol = 1e-3;
    opts.n_cap = 60;
    opts.budget = 1e-3;
    FreeEnergyResult r = free_energy(bernoulli(0.5), opts);
    CHECK(r.tol_reached);
    // regression window around the measured F(1/2) ~ 0.1576
    CHECK(r.low > 0.155);
    CHECK(r.high < 0.160);
}

TEST_CASE("renormalized rejects genuine mass-accounting bugs") {
    LatticePmf::Raw raw;
    raw.mass = {0.5, 0.4};  // total 0.9 with nothing dropped
    CHECK_THROWS_AS(renormalized(LatticePmf::from_raw(std::move(raw))), std::logic_error);
    LatticePmf fine = LatticePmf::from_masses({{0, 0.6}, {2, 0.4 + 3e-10}});
    LatticePmf pinned = renormalized(fine);
    CHECK(pinned.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("truncation budget schedule is summable") {
    double total = 0.0;
    for (int n = 1; n <= 5000; ++n) total += step_truncation_budget(1e-9, n);
    CHECK(total <= 2e-9);
    CHECK(step_truncation_budget(1e-9, 2000) > 0.0);
}
