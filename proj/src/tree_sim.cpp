#include "drlab/tree_sim.hpp"

#include <algorithm>
#include <cmath>

#include "drlab/recursion.hpp"
#include "drlab/util.hpp"

namespace dr {

namespace {

struct DiscreteSampler {
    std::vector<int> values;
    std::vector<double> cdf;

    explicit DiscreteSampler(const std::vector<std::pair<int, double>>& atoms) {
        double cum = 0.0;
        for (const auto& [k, p] : atoms) {
            values.push_back(k);
            cum += p;
            cdf.push_back(cum);
        }
        cdf.back() = 1.0;
    }
    int draw(Rng& rng) const { return values[rng.next_index(cdf)]; }
};

struct MeanVar {
    double mean = 0.0, se = 0.0, var = 0.0;
};

MeanVar summarize(std::span<const double> xs) {
    MeanVar out;
    if (xs.empty()) return out;
    KahanSum s;
    for (double x : xs) s.add(x);
    out.mean = s.value() / static_cast<double>(xs.size());
    KahanSum v;
    for (double x : xs) v.add((x - out.mean) * (x - out.mean));
    out.var = v.value() / std::max<double>(1.0, static_cast<double>(xs.size()) - 1.0);
    out.se = std::sqrt(out.var / static_cast<double>(xs.size()));
    return out;
}

}  // namespace

std::size_t GwTree::vertex_count() const {
    std::size_t total = 0;
    for (const auto& g : gens) total += g.size();
    return total;
}

GwTree sample_gw_tree(const OffspringLaw& nu, int n, Rng& rng, std::size_t vertex_budget) {
    if (n < 0) throw ValidationError("sample_gw_tree: n must be >= 0");
    DiscreteSampler offspring(nu.atoms());
    GwTree tree;
    tree.depth = n;
    tree.gens.assign(static_cast<std::size_t>(n) + 1, {});
    tree.gens[static_cast<std::size_t>(n)].push_back({});
    std::size_t total = 1;
    for (int i = n; i >= 1; --i) {
        auto& cur = tree.gens[static_cast<std::size_t>(i)];
        auto& par = tree.gens[static_cast<std::size_t>(i) - 1];
        for (std::uint32_t v = 0; v < cur.size(); ++v) {
            int k = offspring.draw(rng);
            cur[v].parent_begin = static_cast<std::uint32_t>(par.size());
            cur[v].parent_count = static_cast<std::uint32_t>(k);
            for (int j = 0; j < k; ++j) {
                GwTree::Vertex p;
                p.child = v;
                par.push_back(p);
            }
            total += static_cast<std::size_t>(k);
            if (total > vertex_budget) {
                throw BudgetError("sample_gw_tree: vertex budget exceeded");
            }
        }
    }
    return tree;
}

InitialSampler::InitialSampler(const ModelSpec& spec) : p_(spec.p) {
    double cum = 0.0;
    const double h = spec.y0.step();
    spec.y0.for_each_atom([&](std::int64_t k, double m) {
        values_.push_back(static_cast<double>(k) * h);
        cum += m;
        cdf_.push_back(cum);
    });
    if (!cdf_.empty()) cdf_.back() = 1.0;
}

double InitialSampler::draw(Rng& rng) const {
    if (rng.next_double() >= p_) return 0.0;
    return values_[rng.next_index(cdf_)];
}

std::vector<std::vector<double>> evaluate_recursion_on_tree(const GwTree& tree,
                                                            const InitialSampler& x0, Rng& rng) {
    std::vector<std::vector<double>> x(tree.gens.size());
    x[0].resize(tree.gens[0].size());
    for (double& v : x[0]) v = x0.draw(rng);
    for (std::size_t i = 1; i < tree.gens.size(); ++i) {
        const auto& gen = tree.gens[i];
        x[i].resize(gen.size());
        for (std::size_t v = 0; v < gen.size(); ++v) {
            double sum = 0.0;
            for (std::uint32_t j = 0; j < gen[v].parent_count; ++j) {
                sum += x[i - 1][gen[v].parent_begin + j];
            }
            x[i][v] = std::max(sum - 1.0, 0.0);
        }
    }
    return x;
}

std::uint64_t gw_leaf_count(const OffspringLaw& nu, int depth, Rng& rng,
                            std::size_t vertex_budget) {
    DiscreteSampler offspring(nu.atoms());
    std::uint64_t pop = 1;
    for (int d = 0; d < depth; ++d) {
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < pop; ++i) {
            next += static_cast<std::uint64_t>(offspring.draw(rng));
        }
        pop = next;
        if (pop > vertex_budget) throw BudgetError("gw_leaf_count: vertex budget exceeded");
    }
    return pop;
}

std::uint64_t SpineSample::t0_below(int i) const {
    std::uint64_t total = 1;
    for (int j = 0; j < i; ++j) total += levels[static_cast<std::size_t>(j)].lambda;
    return total;
}

SpineSample sample_spine(const OffspringLaw& nu, int n, Rng& rng, std::size_t vertex_budget) {
    if (n < 1) throw ValidationError("sample_spine: n must be >= 1");
    DiscreteSampler biased(nu.size_biased());
    SpineSample out;
    out.n = n;
    out.levels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SpineLevel& lvl = out.levels[static_cast<std::size_t>(i)];
        lvl.bro_count = biased.draw(rng) - 1;
        lvl.bro_leaves.reserve(static_cast<std::size_t>(lvl.bro_count));
        for (int b = 0; b < lvl.bro_count; ++b) {
            std::uint64_t leaves = gw_leaf_count(nu, i, rng, vertex_budget);
            lvl.bro_leaves.push_back(leaves);
            lvl.lambda += leaves;
        }
    }
    return out;
}

// --- tree view and functionals ----------------------------------------------

TreeView TreeView::build(const GwTree& tree) {
    TreeView view;
    view.tree = &tree;
    view.t0.resize(tree.gens.size());
    view.t0[0].assign(tree.gens[0].size(), 1);
    for (std::size_t i = 1; i < tree.gens.size(); ++i) {
        const auto& gen = tree.gens[i];
        view.t0[i].resize(gen.size());
        for (std::size_t v = 0; v < gen.size(); ++v) {
            std::uint64_t total = 0;
            for (std::uint32_t j = 0; j < gen[v].parent_count; ++j) {
                total += view.t0[i - 1][gen[v].parent_begin + j];
            }
            view.t0[i][v] = total;
        }
    }
    return view;
}

std::uint32_t TreeView::chain(std::size_t leaf, int j) const {
    std::uint32_t v = static_cast<std::uint32_t>(leaf);
    for (int i = 0; i < j; ++i) v = tree->gens[static_cast<std::size_t>(i)][v].child;
    return v;
}

std::uint64_t TreeView::lambda_at(std::size_t leaf, int j) const {
    if (j >= tree->depth) return 0;
    std::uint32_t v = chain(leaf, j);
    std::uint32_t c = tree->gens[static_cast<std::size_t>(j)][v].child;
    return t0[static_cast<std::size_t>(j) + 1][c] - t0[static_cast<std::size_t>(j)][v];
}

namespace {

class OnesFunctional final : public PathFunctional {
public:
    std::string name() const override { return "ones"; }
    double eval_leaf(const TreeView&, std::size_t) const override { return 1.0; }
    double eval_spine(const SpineSample&) const override { return 1.0; }
};

class LeafCountFunctional final : public PathFunctional {
public:
    explicit LeafCountFunctional(int level) : level_(level) {}
    std::string name() const override { return "t0_at_" + std::to_string(level_); }
    double eval_leaf(const TreeView& view, std::size_t leaf) const override {
        std::uint32_t v = view.chain(leaf, level_);
        return static_cast<double>(view.t0[static_cast<std::size_t>(level_)][v]);
    }
    double eval_spine(const SpineSample& spine) const override {
        return static_cast<double>(spine.t0_below(level_));
    }

private:
    int level_;
};

class LambdaZeroFunctional final : public PathFunctional {
public:
    explicit LambdaZeroFunctional(int level) : level_(level) {}
    std::string name() const override { return "lambda_zero_at_" + std::to_string(level_); }
    double eval_leaf(const TreeView& view, std::size_t leaf) const override {
        return view.lambda_at(leaf, level_) == 0 ? 1.0 : 0.0;
    }
    double eval_spine(const SpineSample& spine) const override {
        if (level_ >= spine.n) return 1.0;  // the root has no brothers
        return spine.levels[static_cast<std::size_t>(level_)].lambda == 0 ? 1.0 : 0.0;
    }

private:
    int level_;
};

const OnesFunctional kOnes;

}  // namespace

const PathFunctional& functional_ones() { return kOnes; }

const PathFunctional& functional_leaf_count(int level) {
    static std::map<int, LeafCountFunctional> cache;
    return cache.try_emplace(level, level).first->second;
}

const PathFunctional& functional_lambda_zero(int level) {
    static std::map<int, LambdaZeroFunctional> cache;
    return cache.try_emplace(level, level).first->second;
}

MtoResult many_to_one_check(const PathFunctional& g, const OffspringLaw& nu, int n, int trials,
                            std::uint64_t seed, std::size_t vertex_budget) {
    MtoResult res;
    const double mn = std::pow(nu.mean(), n);

    std::vector<double> lhs(static_cast<std::size_t>(trials));
    std::vector<double> rhs(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        GwTree tree = sample_gw_tree(nu, n, rng, vertex_budget);
        TreeView view = TreeView::build(tree);
        double total = 0.0;
        for (std::size_t u = 0; u < tree.leaf_count(); ++u) total += g.eval_leaf(view, u);
        lhs[static_cast<std::size_t>(t)] = total;

        Rng rng2(seed ^ 0x5851f42d4c957f2dULL, static_cast<std::uint64_t>(t));
        SpineSample spine = sample_spine(nu, n, rng2, vertex_budget);
        rhs[static_cast<std::size_t>(t)] = mn * g.eval_spine(spine);
    }
    MeanVar l = summarize(lhs), r = summarize(rhs);
    res.lhs_mc = l.mean;
    res.lhs_se = l.se;
    res.rhs_mc = r.mean;
    res.rhs_se = r.se;
    res.lhs_samples = std::move(lhs);
    res.rhs_samples = std::move(rhs);

    if (n <= 3 && nu.atoms().size() <= 2) {
        res.lhs_enum = enumerate_tree_expectation(g, nu, n);
        res.rhs_enum = mn * enumerate_spine_expectation(g, nu, n);
        res.enum_available = true;
    }
    return res;
}

namespace {

// DFS over offspring assignments, one generation at a time, building the tree
// from the root downward.
void enumerate_trees_rec(const OffspringLaw& nu, GwTree& tree, int gen, std::size_t vertex,
                         double prob, std::size_t& visited, std::size_t max_shapes,
                         const std::function<void(const GwTree&, double)>& fn) {
    if (gen == 0) {
        if (++visited > max_shapes) throw BudgetError("tree enumeration too large");
        fn(tree, prob);
        return;
    }
    auto& cur = tree.gens[static_cast<std::size_t>(gen)];
    if (vertex == cur.size()) {
        enumerate_trees_rec(nu, tree, gen - 1, 0, prob, visited, max_shapes, fn);
        return;
    }
    auto& par = tree.gens[static_cast<std::size_t>(gen) - 1];
    for (const auto& [k, pk] : nu.atoms()) {
        std::size_t mark = par.size();
        cur[vertex].parent_begin = static_cast<std::uint32_t>(mark);
        cur[vertex].parent_count = static_cast<std::uint32_t>(k);
        for (int j = 0; j < k; ++j) {
            GwTree::Vertex p;
            p.child = static_cast<std::uint32_t>(vertex);
            par.push_back(p);
        }
        enumerate_trees_rec(nu, tree, gen, vertex + 1, prob * pk, visited, max_shapes, fn);
        par.resize(mark);
    }
}

void enumerate_trees(const OffspringLaw& nu, int n, std::size_t max_shapes,
                     const std::function<void(const GwTree&, double)>& fn) {
    GwTree tree;
    tree.depth = n;
    tree.gens.assign(static_cast<std::size_t>(n) + 1, {});
    tree.gens[static_cast<std::size_t>(n)].push_back({});
    std::size_t visited = 0;
    enumerate_trees_rec(nu, tree, n, 0, 1.0, visited, max_shapes, fn);
}

// Exact law of the leaf count of a branching process run down d generations.
std::map<std::uint64_t, double> leaf_count_law(const OffspringLaw& nu, int d) {
    std::map<std::uint64_t, double> law{{1, 1.0}};
    for (int g = 0; g < d; ++g) {
        // law of sum over nu iid copies
        std::map<std::uint64_t, double> next;
        for (const auto& [k, pk] : nu.atoms()) {
            std::map<std::uint64_t, double> conv{{0, 1.0}};
            for (int j = 0; j < k; ++j) {
                std::map<std::uint64_t, double> acc;
                for (const auto& [a, pa] : conv) {
                    for (const auto& [b, pb] : law) acc[a + b] += pa * pb;
                }
                conv = std::move(acc);
            }
            for (const auto& [v, pv] : conv) next[v] += pk * pv;
        }
        law = std::move(next);
    }
    return law;
}

void enumerate_spine_levels(const OffspringLaw& nu, int n, int level, SpineSample& spine,
                            double prob, std::size_t& visited, std::size_t max_configs,
                            const std::vector<std::map<std::uint64_t, double>>& laws,
                            const std::vector<std::pair<int, double>>& biased,
                            const std::function<void(const SpineSample&, double)>& fn) {
    if (level == n) {
        if (++visited > max_configs) throw BudgetError("spine enumeration too large");
        fn(spine, prob);
        return;
    }
    SpineLevel& lvl = spine.levels[static_cast<std::size_t>(level)];
    for (const auto& [k, pk] : biased) {
        int bros = k - 1;
        lvl.bro_count = bros;
        // enumerate the brothers' leaf-count tuple
        std::function<void(int, double)> rec = [&](int b, double pr) {
            if (b == bros) {
                lvl.lambda = 0;
                for (std::uint64_t x : lvl.bro_leaves) lvl.lambda += x;
                enumerate_spine_levels(nu, n, level + 1, spine, pr, visited, max_configs, laws,
                                       biased, fn);
                return;
            }
            for (const auto& [leaves, pl] : laws[static_cast<std::size_t>(level)]) {
                lvl.bro_leaves.push_back(leaves);
                rec(b + 1, pr * pl);
                lvl.bro_leaves.pop_back();
            }
        };
        rec(0, prob * pk);
    }
    lvl = SpineLevel{};
}

}  // namespace

double enumerate_tree_expectation(const PathFunctional& g, const OffspringLaw& nu, int n,
                                  std::size_t max_shapes) {
    KahanSum acc;
    enumerate_trees(nu, n, max_shapes, [&](const GwTree& tree, double prob) {
        TreeView view = TreeView::build(tree);
        double total = 0.0;
        for (std::size_t u = 0; u < tree.leaf_count(); ++u) total += g.eval_leaf(view, u);
        acc.add(prob * total);
    });
    return acc.value();
}

double enumerate_spine_expectation(const PathFunctional& g, const OffspringLaw& nu, int n,
                                   std::size_t max_configs) {
    std::vector<std::map<std::uint64_t, double>> laws;
    for (int i = 0; i < n; ++i) laws.push_back(leaf_count_law(nu, i));
    SpineSample spine;
    spine.n = n;
    spine.levels.resize(static_cast<std::size_t>(n));
    std::size_t visited = 0;
    KahanSum acc;
    enumerate_spine_levels(nu, n, 0, spine, 1.0, visited, max_configs, laws, nu.size_biased(),
                           [&](const SpineSample& sp, double prob) { acc.add(prob * g.eval_spine(sp)); });
    return acc.value();
}

// --- spine moments ------------------------------------------------------------

SpineMoments spine_subtree_moments(const OffspringLaw& nu, int n, int trials, std::uint64_t seed) {
    SpineMoments out;
    const double m = nu.mean();
    for (const auto& [k, p] : nu.atoms()) out.c10 += static_cast<double>(k) * (k - 1.0) * p;
    out.c10 /= m;

    std::vector<std::vector<double>> first(static_cast<std::size_t>(n) + 1),
        second(static_cast<std::size_t>(n) + 1);
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        SpineSample spine = sample_spine(nu, n, rng);
        for (int i = 0; i <= n; ++i) {
            double v = static_cast<double>(spine.t0_below(i));
            first[static_cast<std::size_t>(i)].push_back(v);
            second[static_cast<std::size_t>(i)].push_back(v * v);
        }
    }
    for (int i = 0; i <= n; ++i) {
        MeanVar f = summarize(first[static_cast<std::size_t>(i)]);
        MeanVar s = summarize(second[static_cast<std::size_t>(i)]);
        out.first.push_back(f.mean);
        out.first_se.push_back(f.se);
        out.second.push_back(s.mean);
        out.second_se.push_back(s.se);
        double geom = m == 1.0 ? static_cast<double>(i) : (std::pow(m, i) - 1.0) / (m - 1.0);
        out.expected_first.push_back(out.c10 * geom + 1.0);
    }
    return out;
}

// --- Z statistic ----------------------------------------------------------------

ZResult z_statistic(const ModelSpec& spec, const ZConfig& cfg, int trials, std::uint64_t seed,
                    std::size_t vertex_budget) {
    if (!(cfg.lambda1 > 0.0 && cfg.lambda1 < cfg.lambda2 && cfg.lambda2 < 1.0)) {
        throw ValidationError("z_statistic: need 0 < lambda1 < lambda2 < 1");
    }
    ZResult res;
    const int n = cfg.n;
    const int j_hi = static_cast<int>(std::floor(cfg.lambda1 * n));
    const double lo = std::floor(cfg.lambda1 * n);
    const double hi = std::floor(cfg.lambda2 * n);
    res.j_hi = j_hi;

    InitialSampler x0(spec);
    std::vector<double> zpos(static_cast<std::size_t>(trials));
    double zsum = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        GwTree tree = sample_gw_tree(spec.nu, n, rng, vertex_budget);
        auto x = evaluate_recursion_on_tree(tree, x0, rng);

        // Max leaf value under each vertex.
        std::vector<std::vector<double>> lmax(tree.gens.size());
        lmax[0] = x[0];
        for (std::size_t i = 1; i < tree.gens.size(); ++i) {
            const auto& gen = tree.gens[i];
            lmax[i].resize(gen.size());
            for (std::size_t v = 0; v < gen.size(); ++v) {
                double mx = 0.0;
                for (std::uint32_t j = 0; j < gen[v].parent_count; ++j) {
                    mx = std::max(mx, lmax[i - 1][gen[v].parent_begin + j]);
                }
                lmax[i][v] = mx;
            }
        }
        // M(v) for |v| = j: best leaf among the brothers' subtrees, shifted by j.
        std::vector<std::vector<double>> bm(tree.gens.size());
        for (int j = 1; j <= j_hi; ++j) {
            const auto& gen = tree.gens[static_cast<std::size_t>(j)];
            bm[static_cast<std::size_t>(j)].assign(gen.size(), 0.0);
            const auto& up = tree.gens[static_cast<std::size_t>(j) + 1];
            for (const auto& cv : up) {
                // prefix/suffix maxima over this family's subtree leaf maxima
                std::uint32_t cnt = cv.parent_count;
                if (cnt < 2) continue;
                std::vector<double> pre(cnt), suf(cnt);
                for (std::uint32_t i2 = 0; i2 < cnt; ++i2) {
                    double v = lmax[static_cast<std::size_t>(j)][cv.parent_begin + i2];
                    pre[i2] = i2 ? std::max(pre[i2 - 1], v) : v;
                }
                for (std::uint32_t i2 = cnt; i2-- > 0;) {
                    double v = lmax[static_cast<std::size_t>(j)][cv.parent_begin + i2];
                    suf[i2] = i2 + 1 < cnt ? std::max(suf[i2 + 1], v) : v;
                }
                for (std::uint32_t i2 = 0; i2 < cnt; ++i2) {
                    double other = 0.0;
                    if (i2 > 0) other = std::max(other, pre[i2 - 1]);
                    if (i2 + 1 < cnt) other = std::max(other, suf[i2 + 1]);
                    bm[static_cast<std::size_t>(j)][cv.parent_begin + i2] =
                        std::max(other - static_cast<double>(j), 0.0);
                }
            }
        }
        // Running maximum of M along the chain from generation 1 up to j_hi.
        std::vector<std::vector<double>> pm(tree.gens.size());
        for (int j = j_hi; j >= 1; --j) {
            const auto& gen = tree.gens[static_cast<std::size_t>(j)];
            pm[static_cast<std::size_t>(j)].resize(gen.size());
            for (std::size_t v = 0; v < gen.size(); ++v) {
                double val = bm[static_cast<std::size_t>(j)][v];
                if (j < j_hi) {
                    val = std::max(val, pm[static_cast<std::size_t>(j) + 1][gen[v].child]);
                }
                pm[static_cast<std::size_t>(j)][v] = val;
            }
        }

        int z = 0;
        for (std::size_t u = 0; u < tree.leaf_count(); ++u) {
            double xu = x[0][u];
            if (xu < lo || xu > hi) continue;
            double best = j_hi >= 1 ? pm[1][tree.gens[0][u].child] : 0.0;
            if (best >= cfg.b + n - xu) ++z;
        }
        zsum += z;
        zpos[static_cast<std::size_t>(t)] = z >= 1 ? 1.0 : 0.0;
        res.z_samples.push_back(static_cast<double>(z));
    }
    MeanVar mv = summarize(zpos);
    res.p_z = mv.mean;
    res.se = mv.se;
    res.mean_z = zsum / trials;

    IterateOptions opts;
    opts.n_max = n;
    opts.conv.allow_fft = false;
    res.p_exact_tail = iterate(spec, opts).final_pmf.tail(cfg.b);
    return res;
}

WCheck martingale_w_check(const OffspringLaw& nu, int depth, int trials, std::uint64_t seed,
                          std::size_t vertex_budget) {
    DiscreteSampler offspring(nu.atoms());
    const double m = nu.mean();
    std::vector<std::vector<double>> w(static_cast<std::size_t>(depth) + 1);
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        std::uint64_t pop = 1;
        w[0].push_back(1.0);
        for (int d = 1; d <= depth; ++d) {
            std::uint64_t next = 0;
            for (std::uint64_t i = 0; i < pop; ++i) {
                next += static_cast<std::uint64_t>(offspring.draw(rng));
            }
            pop = next;
            if (pop > vertex_budget) throw BudgetError("martingale_w_check: budget exceeded");
            w[static_cast<std::size_t>(d)].push_back(static_cast<double>(pop) / std::pow(m, d));
        }
    }
    WCheck out;
    for (int d = 0; d <= depth; ++d) {
        MeanVar mv = summarize(w[static_cast<std::size_t>(d)]);
        out.mean.push_back(mv.mean);
        out.se.push_back(mv.se);
        out.var.push_back(mv.var);
    }
    return out;
}

std::vector<double> sample_max_leaf_exceed(const ModelSpec& spec, int n,
                                           std::span<const double> b_grid, int trials,
                                           std::uint64_t seed, std::size_t vertex_budget) {
    InitialSampler x0(spec);
    std::vector<double> hits(b_grid.size(), 0.0);
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        GwTree tree = sample_gw_tree(spec.nu, n, rng, vertex_budget);
        double mx = 0.0;
        for (std::size_t u = 0; u < tree.leaf_count(); ++u) mx = std::max(mx, x0.draw(rng));
        for (std::size_t i = 0; i < b_grid.size(); ++i) {
            if (mx - n > b_grid[i]) hits[i] += 1.0;
        }
    }
    for (double& h : hits) h /= trials;
    return hits;
}

TreeLawResult tree_law_check(const ModelSpec& spec, const LatticePmf& exact, int n, int trials,
                             std::uint64_t seed, std::size_t vertex_budget) {
    InitialSampler x0(spec);
    std::map<std::int64_t, double> hist;
    const double inv_h = static_cast<double>(exact.step_den());
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        GwTree tree = sample_gw_tree(spec.nu, n, rng, vertex_budget);
        auto x = evaluate_recursion_on_tree(tree, x0, rng);
        double root = x[static_cast<std::size_t>(n)][0];
        hist[static_cast<std::int64_t>(std::llround(root * inv_h))] += 1.0;
    }
    for (auto& [k, v] : hist) v /= trials;

    TreeLawResult res;
    res.hist = hist;
    KahanSum tv;
    KahanSum gate;
    exact.for_each_atom([&](std::int64_t k, double pm) {
        auto it = hist.find(k);
        double emp = it == hist.end() ? 0.0 : it->second;
        tv.add(std::fabs(emp - pm));
        gate.add(std::sqrt(pm * (1.0 - pm) / trials));
    });
    for (const auto& [k, emp] : hist) {
        if (exact.mass_at(k) == 0.0) tv.add(emp);
    }
    res.tv = 0.5 * tv.value();
    res.tv_gate = 3.0 * 0.5 * gate.value() + 1e-6;
    return res;
}

ChiSquareResult spine_brother_chisq(const OffspringLaw& nu, int trials, std::uint64_t seed) {
    auto biased = nu.size_biased();
    DiscreteSampler sampler(biased);
    std::map<int, std::uint64_t> counts;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        counts[sampler.draw(rng) - 1] += 1;
    }
    ChiSquareResult res;
    res.df = static_cast<int>(biased.size()) - 1;
    for (const auto& [k, p] : biased) {
        double expect = p * trials;
        double got = static_cast<double>(counts[k - 1]);
        res.stat += (got - expect) * (got - expect) / expect;
    }
    static const double kCrit001[] = {0.0, 10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124};
    res.critical = res.df >= 1 && res.df <= 8 ? kCrit001[res.df] : 10.828 + 2.6 * res.df;
    res.pass = res.df == 0 ? res.stat == 0.0 : res.stat < res.critical;
    return res;
}

}  // namespace dr
