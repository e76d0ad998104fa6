#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drlab/config.hpp"
#include "drlab/criticality.hpp"
#include "drlab/experiments.hpp"
#include "drlab/gf_bounds.hpp"
#include "drlab/recursion.hpp"
#include "drlab/tree_sim.hpp"
#include "drlab/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitUndecided = 3;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out = "-";
    std::string format;
    unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_format) {
    args.format = default_format;
    cmd->add_option("--config", args.config_path, "JSON model/run document")->required();
    cmd->add_option("--seed", args.seed, "RNG seed");
    cmd->add_option("--out", args.out, "output path, - for stdout");
    cmd->add_option("--format", args.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", args.threads, "worker threads for grid sweeps");
}

void write_output(const CommonArgs& args, const std::string& text) {
    if (args.out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(args.out, std::ios::binary);
    if (!f) throw dr::ValidationError(args.out + ": cannot open for writing");
    f << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json fe_json(const dr::FreeEnergyResult& r) {
    return nlohmann::json{{"schema_version", 1}, {"low", r.low},       {"high", r.high},
                          {"width", r.width()},  {"n_used", r.n_used}, {"tol_reached", r.tol_reached},
                          {"flag", r.flag}};
}

int run_iterate(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    dr::IterateOptions opts;
    opts.n_max = cfg.run_int("n_max", 20);
    opts.budget = cfg.run_number("budget", 0.0);
    if (cfg.run_has("gf_s")) opts.gf_points = cfg.run_grid("gf_s");
    dr::IterateResult res = dr::iterate(cfg.spec_at(cfg.single_p()), opts);

    if (args.format == "csv") {
        std::ostringstream os;
        dr::write_trace_csv(os, res.trace);
        write_output(args, os.str());
    } else {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : res.trace.rows) {
            nlohmann::json row{{"n", r.n},
                               {"mean_low", r.mean_low},
                               {"mean_high", r.mean_high},
                               {"zero_mass", r.zero_mass},
                               {"support_size", r.support},
                               {"dropped", r.dropped},
                               {"F_low", r.f_low_raw},
                               {"F_high", r.f_high}};
            if (!r.gf.empty()) {
                nlohmann::json gf = nlohmann::json::array();
                for (const auto& g : r.gf) {
                    gf.push_back({{"s", g.s}, {"G", g.g}, {"G_deriv", g.g_deriv}});
                }
                row["gf"] = gf;
            }
            rows.push_back(row);
        }
        write_output(args, dump({{"schema_version", 1}, {"rows", rows}}));
    }
    return res.stop == dr::StopReason::support_cap ? kExitUndecided : kExitOk;
}

int run_free_energy(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    dr::FreeEnergyOptions opts;
    opts.tol = cfg.run_number("tol", 1e-6);
    if (cfg.run_has("rel_tol")) opts.rel_tol = cfg.run_number("rel_tol", 0.1);
    opts.n_cap = cfg.run_int("n_cap", 200);
    opts.budget = cfg.run_number("budget", 0.0);
    dr::FreeEnergyResult r = dr::free_energy(cfg.spec_at(cfg.single_p()), opts);
    write_output(args, dump(fe_json(r)));
    return r.tol_reached ? kExitOk : kExitUndecided;
}

int run_pc_bisect(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    if (!cfg.run_has("p_lo") || !cfg.run_has("p_hi")) {
        throw dr::ValidationError("pc-bisect: run.p_lo and run.p_hi are required");
    }
    dr::CertifyOptions opts;
    opts.n_max = cfg.run_int("n_max", 1200);
    double tol = cfg.run_number("tol", 1e-3);
    auto family = [&](double p) { return cfg.spec_at(p); };
    dr::BisectResult res =
        dr::pc_bisect(family, cfg.run_number("p_lo", 0.0), cfg.run_number("p_hi", 1.0), tol, opts);
    write_output(args, dump(res.to_json()));
    return res.converged ? kExitOk : kExitUndecided;
}

int run_gf_bound(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    std::string mode = cfg.run_string("mode", "bound");
    if (mode == "trace") {
        double s = cfg.run_number("s", 1.5);
        int n_max = cfg.run_int("n_max", 20);
        auto trace = dr::gf_trace(cfg.spec_at(cfg.single_p()), s, n_max);
        dr::ContractionReport rep = dr::verify_contraction(trace, cfg.nu);
        if (args.format == "csv") {
            std::ostringstream os;
            os << "n,s,G,G_deriv,a,G_zero,G_scalar,G_deriv_scalar,crosscheck_ok\n";
            char buf[320];
            for (const auto& pt : trace) {
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                              pt.n, pt.s, pt.g, pt.g_deriv, pt.a, pt.g_zero, pt.g_scalar,
                              pt.g_deriv_scalar, pt.crosscheck_ok ? 1 : 0);
                os << buf;
            }
            write_output(args, os.str());
        } else {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& pt : trace) {
                pts.push_back({{"n", pt.n},
                               {"G", pt.g},
                               {"G_deriv", pt.g_deriv},
                               {"a", pt.a},
                               {"G_zero", pt.g_zero},
                               {"crosscheck_ok", pt.crosscheck_ok}});
            }
            write_output(args, dump({{"schema_version", 1},
                                     {"s", s},
                                     {"points", pts},
                                     {"contraction_ok", rep.ok},
                                     {"checked_up_to", rep.checked_up_to},
                                     {"min_margin_ratio", rep.min_margin_ratio}}));
        }
        return rep.ok ? kExitOk : kExitUndecided;
    }

    std::vector<double> grid = cfg.p_grid;
    if (grid.empty()) grid.push_back(cfg.single_p());
    std::vector<dr::GfBoundResult> rows;
    bool all_established = true;
    for (double p : grid) {
        dr::ModelSpec spec = cfg.spec_at(p);
        if (!spec.tail) throw dr::ValidationError("gf-bound: model.family required");
        dr::GfBoundResult r =
            spec.tail->kind == dr::TailMeta::Kind::critical
                ? dr::upper_bound_critical_scan(spec, cfg.run_number("c7", 1.0))
                : dr::upper_bound_power_law_scan(spec, cfg.run_number("c9", 1.0));
        all_established = all_established && r.established;
        rows.push_back(r);
    }
    if (args.format == "csv") {
        std::ostringstream os;
        dr::write_gf_bound_csv(os, rows);
        write_output(args, os.str());
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            arr.push_back({{"p", r.p},
                           {"s", r.s},
                           {"N", r.n_sched},
                           {"a_N", r.a_n},
                           {"F_upper", r.f_upper},
                           {"established", r.established},
                           {"note", r.note}});
        }
        write_output(args, dump({{"schema_version", 1}, {"rows", arr}}));
    }
    return all_established ? kExitOk : kExitUndecided;
}

int run_tree_check(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    std::string check = cfg.run_string("check", "many-to-one");
    int n = cfg.run_int("n", 6);
    int trials = cfg.run_int("trials", 100000);
    nlohmann::json out{{"schema_version", 1}, {"check", check}, {"n", n}, {"trials", trials},
                       {"seed", args.seed}};
    bool ok = true;
    std::ostringstream csv;
    char buf[256];

    if (check == "many-to-one") {
        int level = cfg.run_int("level", 1);
        nlohmann::json rows = nlohmann::json::array();
        const dr::PathFunctional* fns[] = {&dr::functional_ones(), &dr::functional_leaf_count(level),
                                           &dr::functional_lambda_zero(level)};
        csv << "row_kind,functional,trial,lhs,rhs\n";
        for (const dr::PathFunctional* g : fns) {
            dr::MtoResult r = dr::many_to_one_check(*g, cfg.nu, n, trials, args.seed);
            if (args.format == "csv") {
                for (std::size_t i = 0; i < r.lhs_samples.size(); ++i) {
                    std::snprintf(buf, sizeof(buf), "trial,%s,%zu,%.17g,%.17g\n",
                                  g->name().c_str(), i, r.lhs_samples[i], r.rhs_samples[i]);
                    csv << buf;
                }
                std::snprintf(buf, sizeof(buf), "mean,%s,,%.17g,%.17g\n", g->name().c_str(),
                              r.lhs_mc, r.rhs_mc);
                csv << buf;
                std::snprintf(buf, sizeof(buf), "se,%s,,%.17g,%.17g\n", g->name().c_str(),
                              r.lhs_se, r.rhs_se);
                csv << buf;
            }
            double comb = std::sqrt(r.lhs_se * r.lhs_se + r.rhs_se * r.rhs_se);
            bool within = std::fabs(r.lhs_mc - r.rhs_mc) <= 3.0 * comb + 1e-12;
            bool enum_ok = !r.enum_available ||
                           std::fabs(r.lhs_enum - r.rhs_enum) <=
                               1e-9 * std::max(1.0, std::fabs(r.lhs_enum));
            ok = ok && within && enum_ok;
            rows.push_back({{"functional", g->name()},
                            {"lhs_mc", r.lhs_mc},
                            {"lhs_se", r.lhs_se},
                            {"rhs_mc", r.rhs_mc},
                            {"rhs_se", r.rhs_se},
                            {"enum_available", r.enum_available},
                            {"lhs_enum", r.lhs_enum},
                            {"rhs_enum", r.rhs_enum},
                            {"within_3se", within}});
        }
        out["rows"] = rows;
    } else if (check == "spine") {
        dr::ChiSquareResult chi = dr::spine_brother_chisq(cfg.nu, trials, args.seed);
        dr::SpineMoments mom = dr::spine_subtree_moments(cfg.nu, n, trials, args.seed);
        nlohmann::json moments = nlohmann::json::array();
        for (std::size_t i = 0; i < mom.first.size(); ++i) {
            bool within = std::fabs(mom.first[i] - mom.expected_first[i]) <= 3.0 * mom.first_se[i] + 1e-9;
            ok = ok && within;
            moments.push_back({{"i", i},
                               {"mean", mom.first[i]},
                               {"se", mom.first_se[i]},
                               {"expected", mom.expected_first[i]},
                               {"second_moment", mom.second[i]},
                               {"within_3se", within}});
        }
        ok = ok && chi.pass;
        out["chi_square"] = {{"stat", chi.stat}, {"df", chi.df}, {"critical_001", chi.critical},
                             {"pass", chi.pass}};
        out["c10"] = mom.c10;
        out["subtree_moments"] = moments;
    } else if (check == "z") {
        dr::ZConfig zc;
        zc.n = n;
        zc.b = cfg.run_number("b", 1.0);
        zc.lambda1 = cfg.run_number("lambda1", 1.0 / 3.0);
        zc.lambda2 = cfg.run_number("lambda2", 2.0 / 3.0);
        dr::ZResult r = dr::z_statistic(cfg.spec_at(cfg.single_p()), zc, trials, args.seed);
        ok = r.p_z <= r.p_exact_tail + 3.0 * r.se + 1e-12;
        if (args.format == "csv") {
            csv << "row_kind,trial,value\n";
            for (std::size_t i = 0; i < r.z_samples.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "trial,%zu,%.17g\n", i, r.z_samples[i]);
                csv << buf;
            }
            std::snprintf(buf, sizeof(buf), "p_z_ge_1,,%.17g\nse,,%.17g\np_exact_tail,,%.17g\nmean_z,,%.17g\n",
                          r.p_z, r.se, r.p_exact_tail, r.mean_z);
            csv << buf;
        }
        out["p_z_ge_1"] = r.p_z;
        out["se"] = r.se;
        out["p_exact_tail"] = r.p_exact_tail;
        out["mean_z"] = r.mean_z;
        out["within_bound"] = ok;
    } else if (check == "martingale") {
        dr::WCheck w = dr::martingale_w_check(cfg.nu, n, trials, args.seed);
        nlohmann::json rows = nlohmann::json::array();
        csv << "j,mean,se,var\n";
        for (std::size_t j = 0; j < w.mean.size(); ++j) {
            bool within = std::fabs(w.mean[j] - 1.0) <= 3.0 * w.se[j] + 1e-12;
            ok = ok && within;
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", j, w.mean[j], w.se[j],
                          w.var[j]);
            csv << buf;
            rows.push_back({{"j", j}, {"mean", w.mean[j]}, {"se", w.se[j]}, {"var", w.var[j]},
                            {"within_3se", within}});
        }
        out["rows"] = rows;
    } else if (check == "max-leaf") {
        std::vector<double> bs = cfg.run_has("b_grid") ? cfg.run_grid("b_grid")
                                                       : std::vector<double>{0.0, 1.0, 2.0};
        dr::MaxLeafReport r =
            dr::max_leaf_lower_bound_check(cfg.spec_at(cfg.single_p()), n, bs, trials, args.seed);
        ok = r.all_ok;
        out["report"] = r.to_json();
    } else if (check == "tree-law") {
        dr::ModelSpec spec = cfg.spec_at(cfg.single_p());
        dr::IterateOptions io;
        io.n_max = n;
        dr::LatticePmf exact = dr::iterate(spec, io).final_pmf;
        dr::TreeLawResult r = dr::tree_law_check(spec, exact, n, trials, args.seed);
        ok = r.tv <= r.tv_gate;
        out["tv"] = r.tv;
        out["tv_gate"] = r.tv_gate;
        out["within_gate"] = ok;
    } else {
        throw dr::ValidationError("tree-check: unknown run.check '" + check + "'");
    }
    out["pass"] = ok;
    if (args.format == "csv" && csv.tellp() > 0) {
        write_output(args, csv.str());
    } else {
        write_output(args, dump(out));
    }
    return ok ? kExitOk : kExitUndecided;
}

int run_fit(const CommonArgs& args, bool beta) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    if (!cfg.family) throw dr::ValidationError("fit: model.family required");
    if (cfg.p_grid.empty()) throw dr::ValidationError("fit: model.p_grid required");
    dr::FitOptions opts;
    opts.nu = cfg.nu;
    opts.threads = args.threads;
    if (cfg.run_has("k_max")) opts.k_max = cfg.run_int("k_max", 0);
    opts.rel_width_gate = cfg.run_number("rel_width_gate", 0.15);
    opts.n_cap = cfg.run_int("n_cap", 400);

    dr::FitReport report;
    double m = cfg.family->m;
    if (beta) {
        if (cfg.family->meta.kind != dr::TailMeta::Kind::exponential) {
            throw dr::ValidationError("fit-beta: family must be exponential(theta)");
        }
        report = dr::fit_beta(cfg.family->meta.param, m, cfg.p_grid,
                              cfg.run_number("tol", 0.3), opts);
    } else {
        if (cfg.family->meta.kind != dr::TailMeta::Kind::critical) {
            throw dr::ValidationError("fit-chi: family must be critical(alpha)");
        }
        opts.refinement_floor = cfg.run_number("refinement_floor", 0.05);
        report = dr::fit_chi(cfg.family->meta.param, m, cfg.p_grid,
                             cfg.run_number("tol", 0.2), opts);
    }
    if (args.format == "csv") {
        std::ostringstream os;
        dr::write_fit_csv(os, report);
        write_output(args, os.str());
    } else {
        write_output(args, dump(report.to_json()));
    }
    return report.pass ? kExitOk : kExitUndecided;
}

int run_conjecture_scan(const CommonArgs& args) {
    dr::RunConfig cfg = dr::load_config(args.config_path);
    if (!cfg.y0) throw dr::ValidationError("conjecture-scan: explicit model.y0 required");
    dr::ConjectureScanOptions opts;
    opts.points = cfg.run_int("points", 8);
    opts.threads = args.threads;
    opts.n_cap = cfg.run_int("n_cap", 2000);
    double pc = cfg.run_has("p_c") ? cfg.run_number("p_c", 0.0)
                                   : dr::pc_closed_form(*cfg.y0, cfg.nu.mean());
    dr::FitReport report = dr::conjecture_scan(*cfg.y0, cfg.nu, pc,
                                               cfg.run_number("p_lo", pc + 0.05),
                                               cfg.run_number("p_hi", pc + 0.25), opts);
    nlohmann::json j = report.to_json();
    j["p_c"] = pc;
    write_output(args, dump(j));
    return report.partial ? kExitUndecided : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for a max-type recursive distributional map"};
    app.require_subcommand(1);

    CommonArgs iterate_args, fe_args, pc_args, gf_args, tree_args, beta_args, chi_args, conj_args;
    add_common(app.add_subcommand("iterate", "iterate the map and emit the trace"), iterate_args,
               "csv");
    add_common(app.add_subcommand("free-energy", "certified free-energy interval"), fe_args,
               "json");
    add_common(app.add_subcommand("pc-bisect", "bracket the critical parameter"), pc_args, "json");
    add_common(app.add_subcommand("gf-bound", "generating-function bounds and traces"), gf_args,
               "csv");
    add_common(app.add_subcommand("tree-check", "tree / spine monte-carlo validations"), tree_args,
               "json");
    add_common(app.add_subcommand("fit-beta", "power-law exponent fit"), beta_args, "json");
    add_common(app.add_subcommand("fit-chi", "stretched-exponential exponent fit"), chi_args,
               "json");
    add_common(app.add_subcommand("conjecture-scan", "exploratory scan above p_c"), conj_args,
               "json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("iterate")) return run_iterate(iterate_args);
        if (app.got_subcommand("free-energy")) return run_free_energy(fe_args);
        if (app.got_subcommand("pc-bisect")) return run_pc_bisect(pc_args);
        if (app.got_subcommand("gf-bound")) return run_gf_bound(gf_args);
        if (app.got_subcommand("tree-check")) return run_tree_check(tree_args);
        if (app.got_subcommand("fit-beta")) return run_fit(beta_args, true);
        if (app.got_subcommand("fit-chi")) return run_fit(chi_args, false);
        if (app.got_subcommand("conjecture-scan")) return run_conjecture_scan(conj_args);
    } catch (const dr::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const dr::BudgetError& e) {
        std::cerr << "budget: " << e.what() << "\n";
        return kExitUndecided;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
