#include <doctest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drlab/criticality.hpp"
#include "drlab/experiments.hpp"
#include "drlab/util.hpp"

using namespace dr;

TEST_CASE("exponent formulas") {
    const double m = 2.0;
    CHECK(beta_exponent(0.5 * std::log(m), m) == doctest::Approx(2.0));
    // theta -> 0 sends beta to 1
    CHECK(beta_exponent(1e-9, m) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(chi_exponent(0.0) == doctest::Approx(0.5));
    CHECK(chi_exponent(1.0) == doctest::Approx(1.0 / 3.0));
    // alpha -> infinity sends chi to 0
    CHECK(chi_exponent(1e9) < 1e-8);
}

TEST_CASE("geometric grid") {
    auto g = geometric_grid(0.5, 0.5, 4);
    REQUIRE(g.size() == 4);
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[3] == doctest::Approx(0.0625));
    CHECK_THROWS_AS(geometric_grid(-1.0, 0.5, 3), ValidationError);
}

TEST_CASE("sweep cap keeps the realized family supercritical") {
    // Remainder alone is not enough: the truncated critical family has
    // p_c ~ k_max^{-2}, so the cap must grow with 1/p.
    int k = sweep_k_max(TailMeta::Kind::critical, 0.0, 2.0, std::pow(2.0, -10));
    CHECK(family_pc_closed_form(TailMeta::Kind::critical, 0.0, 2.0, k) <
          std::pow(2.0, -10) / 50.0);
    CHECK(k > 40);
}

TEST_CASE("beta fit on a short grid") {
    auto grid = geometric_grid(std::pow(2.0, -4), 0.5, 5);
    FitReport r = fit_beta(0.5 * std::log(2.0), 2.0, grid, 0.3);
    CHECK(r.kind == "beta");
    CHECK(r.target == doctest::Approx(2.0));
    CHECK(std::fabs(r.slope - 2.0) <= 0.3);
    CHECK(r.pass);
    for (const auto& pt : r.points) CHECK(pt.admissible);
    // F must not decrease with p
    for (std::size_t i = 1; i < r.points.size(); ++i) {
        CHECK(r.points[i].f_mid <= r.points[i - 1].f_mid);
    }
}

TEST_CASE("beta fit validates its window and grid size") {
    auto grid = geometric_grid(0.0625, 0.5, 3);
    CHECK_THROWS_AS(fit_beta(0.5 * std::log(2.0), 2.0, grid, 0.3), ValidationError);
    auto grid5 = geometric_grid(0.0625, 0.5, 5);
    CHECK_THROWS_AS(fit_beta(2.0 * std::log(2.0), 2.0, grid5, 0.3), ValidationError);
}

TEST_CASE("chi fit on a short grid with the one-sided refinement") {
    auto grid = geometric_grid(std::pow(2.0, -4), 0.5, 5);
    FitReport r = fit_chi(0.0, 2.0, grid, 0.2);
    CHECK(r.target == doctest::Approx(0.5));
    CHECK(std::fabs(r.slope - 0.5) <= 0.2);
    REQUIRE(r.refinement_min.has_value());
    CHECK(*r.refinement_min > 0.05);
    CHECK(r.pass);
    nlohmann::json j = r.to_json();
    CHECK(j["schema_version"] == 1);
    CHECK(j["kind"] == "chi");
    CHECK(j["refinement_min"].is_number());
}

TEST_CASE("conjecture scan stays exploratory") {
    LatticePmf y0 = LatticePmf::delta(2);
    OffspringLaw nu = OffspringLaw::deterministic(2);
    double pc = pc_closed_form(y0, 2);
    ConjectureScanOptions opts;
    opts.points = 6;
    FitReport r = conjecture_scan(y0, nu, pc, 0.25, 0.45, opts);
    CHECK(r.kind == "conjecture");
    CHECK(r.note.find("exploratory") != std::string::npos);
    CHECK(r.to_json()["exploratory"] == true);
    // log(1/F) decreasing in p <=> F increasing
    double prev = -1.0;
    for (const auto& pt : r.points) {
        REQUIRE(pt.admissible);
        CHECK(pt.f_mid >= prev - 1e-15);
        prev = pt.f_mid;
    }
    CHECK(r.slope > 0.0);  // K estimate

    SUBCASE("window validation") {
        CHECK_THROWS_AS(conjecture_scan(y0, nu, pc, 0.15, 0.45, opts), ValidationError);
        CHECK_THROWS_AS(conjecture_scan(y0, nu, pc, 0.25, 0.9, opts), ValidationError);
    }
    SUBCASE("reruns are identical") {
        FitReport again = conjecture_scan(y0, nu, pc, 0.25, 0.45, opts);
        CHECK(again.slope == r.slope);
        CHECK(again.points.size() == r.points.size());
        for (std::size_t i = 0; i < r.points.size(); ++i) {
            CHECK(again.points[i].f_mid == r.points[i].f_mid);
        }
    }
}

TEST_CASE("max-leaf lower bound check") {
    OffspringLaw nu2 = OffspringLaw::deterministic(2);
    SUBCASE("p = 0: both sides vanish") {
        ModelSpec spec{nu2, LatticePmf::delta(2), 0.0, std::nullopt};
        double bs[] = {0.0, 1.0};
        MaxLeafReport r = max_leaf_lower_bound_check(spec, 3, bs, 2000, 5);
        CHECK(r.all_ok);
        for (const auto& row : r.rows) {
            CHECK(row.exact_gt == 0.0);
            CHECK(row.mc == 0.0);
        }
    }
    SUBCASE("deterministic start at n = 2, b = 2") {
        ModelSpec spec{nu2, LatticePmf::delta(2), 1.0, std::nullopt};
        double bs[] = {2.0};
        MaxLeafReport r = max_leaf_lower_bound_check(spec, 2, bs, 500, 6);
        REQUIRE(r.rows.size() == 1);
        CHECK(r.rows[0].exact_gt == doctest::Approx(1.0));  // X_2 = 5 > 2 surely
        CHECK(r.rows[0].mc == 0.0);                          // max leaf - 2 = 0
        CHECK(r.all_ok);
    }
    SUBCASE("wide initial values give a nontrivial right side") {
        std::map<std::int64_t, double> wide;
        for (std::int64_t k = 1; k <= 12; ++k) wide[k] = 1.0 / 12.0;
        ModelSpec spec{nu2, LatticePmf::from_masses(wide), 0.5, std::nullopt};
        double bs[] = {0.0, 1.0, 2.0};
        MaxLeafReport r = max_leaf_lower_bound_check(spec, 4, bs, 30000, 8);
        CHECK(r.all_ok);
        bool some_positive = false;
        for (const auto& row : r.rows) some_positive = some_positive || row.mc > 0.0;
        CHECK(some_positive);
    }
    SUBCASE("mixture battery at n = 6") {
        ModelSpec spec{nu2, LatticePmf::delta(2), 0.3, std::nullopt};
        double bs[] = {0.0, 1.0, 2.0};
        MaxLeafReport r = max_leaf_lower_bound_check(spec, 6, bs, 30000, 7);
        CHECK(r.all_ok);
        nlohmann::json j = r.to_json();
        CHECK(j["rows"].size() == 3);
    }
}

TEST_CASE("fit csv shape") {
    auto grid = geometric_grid(std::pow(2.0, -4), 0.5, 5);
    FitReport r = fit_beta(0.5 * std::log(2.0), 2.0, grid, 0.3);
    std::ostringstream os;
    write_fit_csv(os, r);
    CHECK(os.str().rfind("p,f_low,f_high,f_mid,rel_width,n_used,admissible\n", 0) == 0);
}

TEST_CASE("thread count does not change fit results") {
    auto grid = geometric_grid(std::pow(2.0, -4), 0.5, 5);
    FitOptions one;
    one.threads = 1;
    FitOptions four;
    four.threads = 4;
    FitReport a = fit_beta(0.5 * std::log(2.0), 2.0, grid, 0.3, one);
    FitReport b = fit_beta(0.5 * std::log(2.0), 2.0, grid, 0.3, four);
    CHECK(a.slope == b.slope);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].f_low == b.points[i].f_low);
        CHECK(a.points[i].f_high == b.points[i].f_high);
    }
}
