// Acceptance suite. One line per criterion:
//   [PASS] N. description (details, seconds)
// Exit status is nonzero if any selected criterion fails.
//
//   acceptance                   all criteria
//   acceptance --criterion 7-11  a range (one process, shared time budget)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cohgrad/aggregators.hpp"
#include "cohgrad/bound.hpp"
#include "cohgrad/coherence.hpp"
#include "cohgrad/datasets.hpp"
#include "cohgrad/models.hpp"
#include "cohgrad/repro.hpp"
#include "cohgrad/trainer.hpp"

using namespace cohgrad;

namespace {

// Pinned tolerances.
constexpr double kExact = 1e-9;
constexpr double kIdentity = 1e-10;
constexpr double kBoundDual = 1e-12;
constexpr double kFdRel = 1e-5;
constexpr double kMonteCarlo = 0.01;
constexpr double kImputedRel = 0.05;
constexpr int kTrials = 1000;
constexpr double kExactBudget = 1.0;
constexpr double kPropertyBudget = 30.0;
constexpr double kBehaviorBudget = 300.0;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("FAILED " + what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Folds an experiment verdict into the outcome; `keep` selects checks.
void absorb(Outcome& o, const Verdict& v, const std::function<bool(const Check&)>& keep = nullptr) {
    for (const auto& c : v.checks) {
        if (keep && !keep(c)) continue;
        const std::string line = c.name + "=" + num(c.observed);
        if (c.pass) {
            o.note(line);
        } else {
            o.expect(false, line + " (" + to_string(c.relation) + " " + num(c.expected) + ")");
        }
    }
}

Mat64 random_stack(Rng& r, std::size_t m, std::size_t d) {
    Mat64 g(m, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) g(i, j) = r.below(5) == 0 ? 0.0 : r.gaussian() + 0.3;
    return g;
}

Mat64 grads_at_zero(const Dataset& d) {
    return Model::linear(6).per_example_grads(Vec64(6, 0.0), d.train);
}

// ---------------------------------------------------------------------------

Outcome c1() {
    Outcome o;
    const auto r = alpha(grads_at_zero(dataset_L()));
    o.expect(std::abs(r.alpha - 0.625) <= kExact, "alpha_m = " + num(r.alpha));
    o.expect(std::abs(r.alpha_hat - 2.5) <= kExact, "alpha_hat = " + num(r.alpha_hat));
    o.note("alpha_m=" + num(r.alpha) + " alpha_hat=" + num(r.alpha_hat));
    return o;
}

Outcome c2() {
    Outcome o;
    const auto r = alpha(grads_at_zero(dataset_M()));
    o.expect(std::abs(r.alpha_hat - 1.0) <= kExact, "alpha_hat = " + num(r.alpha_hat));
    o.note("alpha_hat=" + num(r.alpha_hat));
    return o;
}

Outcome c3() {
    Outcome o;
    const Vec64 l = winsorized_mean(grads_at_zero(dataset_L()), 50);
    for (std::size_t j = 0; j < 5; ++j) o.expect(l[j] == 0.0, "L coordinate " + std::to_string(j + 1) + " nonzero");
    o.expect(l[5] != 0.0, "L coordinate 6 is zero");
    const Vec64 m = winsorized_mean(grads_at_zero(dataset_M()), 50);
    for (std::size_t j = 0; j < 6; ++j) o.expect(m[j] == 0.0, "M coordinate " + std::to_string(j + 1) + " nonzero");
    o.note("L coordinate 6=" + num(l[5]));
    return o;
}

Outcome c4() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::evolution_1d), [](const Check& c) {
        return c.name == "w_star" || c.name == "w_dagger" || c.name == "alpha_at_w_star" ||
               c.name == "alpha_at_w_dagger";
    });
    return o;
}

Outcome c5() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::ex8_two_neurons_memorize));
    return o;
}

Outcome c6() {
    Outcome o;
    Rng r(6);
    double worst = 0.0;
    for (int t = 0; t < kTrials; ++t) {
        // common part along e0 plus orthogonal idiosyncratic parts of equal norm
        const std::size_t m = 1 + r.below(12);
        const double cn = r.uniform(0.0, 4.0), un = r.uniform(0.01, 4.0);
        Mat64 g(m, m + 1);
        for (std::size_t i = 0; i < m; ++i) {
            g(i, 0) = std::sqrt(cn);
            g(i, i + 1) = std::sqrt(un);
        }
        worst = std::max(worst, std::abs(alpha(g).alpha - commonality_alpha(m, cn, un)));
    }
    o.expect(worst <= kIdentity, "max |closed form - direct| = " + num(worst));
    o.note("max deviation " + num(worst) + " over " + std::to_string(kTrials) + " stacks");
    return o;
}

Outcome c7() {
    Outcome o;
    Rng r(7);
    int bad_range = 0, bad_scale = 0, bad_one = 0;
    for (int t = 0; t < kTrials; ++t) {
        const Mat64 g = random_stack(r, 1 + r.below(12), 1 + r.below(8));
        const double a = alpha(g).alpha;
        bad_range += !(a >= 0.0 && a <= 1.0);
        const double k = r.uniform(1e-3, 1e3) * (r.below(2) ? 1.0 : -1.0);
        Mat64 s = g;
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) s(i, j) *= k;
        bad_scale += std::abs(alpha(s).alpha - a) > kIdentity;

        // identical rows reach 1; a perturbed copy stays strictly below
        const std::size_t m = 2 + r.below(8), d = 1 + r.below(6);
        Mat64 same(m, d);
        Vec64 row(d);
        for (double& v : row) v = r.gaussian();
        if (squared_norm(row) == 0.0) row[0] = 1.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) same(i, j) = row[j];
        bad_one += std::abs(alpha(same).alpha - 1.0) > kIdentity;
        same(r.below(m), r.below(d)) += 0.5;
        bad_one += !(alpha(same).alpha < 1.0);
    }
    o.expect(bad_range == 0, std::to_string(bad_range) + " stacks outside [0,1]");
    o.expect(bad_scale == 0, std::to_string(bad_scale) + " scale-invariance violations");
    o.expect(bad_one == 0, std::to_string(bad_one) + " equality-at-1 violations");
    o.note(std::to_string(kTrials) + " trials each");
    return o;
}

Outcome c8() {
    Outcome o;
    Rng r(8);
    double worst_decomp = 0.0, worst_zero = 0.0;
    int bad_a4 = 0, bad_a5 = 0;
    for (int t = 0; t < kTrials; ++t) {
        const std::size_t d = 2 + r.below(10);
        const Mat64 g = random_stack(r, 2 + r.below(10), d);
        std::vector<Segment> segs;
        for (std::size_t off = 0; off < d;) {
            const std::size_t len = 1 + r.below(d - off);
            segs.push_back({"s" + std::to_string(segs.size()), off, len});
            off += len;
        }
        const auto rep = alpha(g, segs);
        double s = 0.0;
        for (const auto& p : rep.per_segment) s += p.fraction * p.alpha;
        worst_decomp = std::max(worst_decomp, std::abs(s - rep.alpha));

        // appending zero rows scales alpha by the nonzero fraction
        if (squared_norm(g.data()) > 0.0) {
            const std::size_t zeros = 1 + r.below(10);
            Mat64 w(g.rows() + zeros, d);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < d; ++j) w(i, j) = g(i, j);
            const double p = static_cast<double>(g.rows()) / static_cast<double>(w.rows());
            const double a = alpha(g).alpha;
            worst_zero = std::max(worst_zero, std::abs(alpha(w).alpha - p * a) / std::max(a, 1e-300));
        }

        // union of two samples living in orthogonal subspaces
        const std::size_t mu = 1 + r.below(6), mv = 1 + r.below(6);
        Mat64 u(mu, 3), v(mv, 3), uv(mu + mv, 6);
        for (std::size_t i = 0; i < mu; ++i)
            for (std::size_t j = 0; j < 3; ++j) uv(i, j) = u(i, j) = r.gaussian() + 0.5;
        for (std::size_t i = 0; i < mv; ++i)
            for (std::size_t j = 0; j < 3; ++j) uv(mu + i, 3 + j) = v(i, j) = r.gaussian() - 0.5;
        const double p = static_cast<double>(mu) / static_cast<double>(mu + mv);
        bad_a4 += alpha(uv).alpha > p * alpha(u).alpha + (1 - p) * alpha(v).alpha + 1e-12;

        const auto db = diff_bound_check(random_stack(r, 2 + r.below(30), 1 + r.below(8)));
        bad_a5 += db.lhs > db.rhs + 1e-12;
    }
    o.expect(worst_decomp <= kIdentity, "decomposition deviation " + num(worst_decomp));
    // scaling is exact up to the last bits of two differently ordered divisions
    o.expect(worst_zero <= 1e-14, "zero-row scaling relative deviation " + num(worst_zero));
    o.expect(bad_a4 == 0, std::to_string(bad_a4) + " orthogonal-union violations");
    o.expect(bad_a5 == 0, std::to_string(bad_a5) + " difference-bound violations");
    o.note("decomposition " + num(worst_decomp) + ", zero-row " + num(worst_zero));
    return o;
}

Outcome c9() {
    Outcome o;
    Rng r(9);
    double worst = 0.0;
    for (int t = 0; t < kTrials; ++t) {
        const double a = t == 0 ? 0.0 : (t == 1 ? 1.0 : r.uniform());
        const std::size_t k = 1 + r.below(256);
        worst = std::max(worst, std::abs(impute_alpha(batch_alpha_forward(a, k), k).alpha - a));
    }
    o.expect(worst <= 1e-12, "round-trip deviation " + num(worst));

    // g = c + s * noise: alpha of the population is |c|^2 / (|c|^2 + d s^2)
    const std::size_t d = 8, k = 4, draws = 10000;
    const Vec64 c = {1, 0.5, 0, 0, -0.5, 0, 0, 0.25};
    const double s = 0.6;
    const double av = squared_norm(c) / (squared_norm(c) + static_cast<double>(d) * s * s);
    CoherenceStats batches(d);
    for (std::size_t b = 0; b < draws; ++b) {
        Vec64 mean(d, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += (c[j] + s * r.gaussian()) / static_cast<double>(k);
        batches.add(mean);
    }
    const double mc = alpha(batches).alpha, formula = batch_alpha_forward(av, k);
    o.expect(std::abs(mc - formula) <= kMonteCarlo, "Monte Carlo " + num(mc) + " vs formula " + num(formula));
    o.note("round-trip " + num(worst) + "; Monte Carlo " + num(mc) + " vs " + num(formula));
    return o;
}

Outcome c10() {
    Outcome o;
    Rng r(10);
    const std::vector<Model> models = {Model::linear(5), Model::diag_deep(5), Model::two_neuron(),
                                       Model::mlp({5, 7, 3}, LossKind::softmax_cross_entropy),
                                       Model::mlp({4, 6, 5, 2}, LossKind::half_square)};
    for (const auto& m : models) {
        double worst = 0.0;
        for (int t = 0; t < kTrials / 5; ++t) {
            Vec64 p(m.num_params());
            for (double& v : p) v = 0.7 * r.gaussian();
            Example e;
            e.x.resize(m.input_dim());
            for (double& v : e.x) v = r.gaussian();
            if (m.loss_kind() == LossKind::softmax_cross_entropy) {
                e.y = one_hot(r.below(m.output_dim()), m.output_dim());
            } else {
                e.y.resize(m.output_dim());
                for (double& v : e.y) v = r.gaussian();
            }
            const Vec64 g = m.grad(p, e);
            for (std::size_t i = 0; i < p.size(); ++i) {
                Vec64 a = p, b = p;
                a[i] += 1e-6;
                b[i] -= 1e-6;
                const double fd = (m.loss(a, e) - m.loss(b, e)) / 2e-6;
                worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i])));
            }
        }
        o.expect(worst < kFdRel, std::string(to_string(m.kind())) + " max error " + num(worst));
        o.note(std::string(to_string(m.kind())) + " " + num(worst));
    }
    return o;
}

double naive_bound(const BoundInputs& in) {
    double s = 0.0;
    for (std::size_t t = 1; t <= in.T(); ++t) {
        double prod = 1.0;
        for (std::size_t k = t + 1; k <= in.T(); ++k) prod *= 1.0 + in.etas[k - 1] * in.beta;
        s += prod * in.etas[t - 1] * std::sqrt(2.0 * (1.0 - in.alphas[t - 1]));
    }
    return in.L_lip * in.L_lip / static_cast<double>(in.m) * s;
}

Outcome c11() {
    Outcome o;
    Rng r(11);
    int bad_dual = 0, bad_zero = 0, bad_m = 0, bad_T = 0, bad_cor = 0;
    for (int t = 0; t < kTrials; ++t) {
        const bool fixed = t % 2 == 0;
        BoundInputs in;
        in.m = 1 + r.below(1000);
        in.L_lip = r.uniform(0.1, 3.0);
        in.beta = r.uniform(0.0, 2.0);
        const double eta = r.uniform(0.001, 0.2);
        const std::size_t T = 2 + r.below(60);
        for (std::size_t s = 1; s <= T; ++s) {
            in.etas.push_back(fixed ? eta : eta / static_cast<double>(s));
            in.alphas.push_back(r.uniform());
        }
        const double b = gap_bound(in);
        bad_dual += std::abs(b - naive_bound(in)) > kBoundDual * std::max(1.0, b);

        BoundInputs one = in;
        one.alphas.assign(T, 1.0);
        bad_zero += gap_bound(one) != 0.0;

        BoundInputs twice = in;
        twice.m = 2 * in.m;
        bad_m += gap_bound(twice) != b / 2.0;

        BoundInputs shorter = in;
        shorter.etas.pop_back();
        shorter.alphas.pop_back();
        bad_T += gap_bound(shorter) > b;

        const double cor = fixed ? gap_bound_fixed_eta(in) : gap_bound_linear_decay(in, eta);
        bad_cor += cor < b * (1 - 1e-12);
    }
    o.expect(bad_dual == 0, std::to_string(bad_dual) + " dual-implementation mismatches");
    o.expect(bad_zero == 0, std::to_string(bad_zero) + " nonzero at alpha = 1");
    o.expect(bad_m == 0, std::to_string(bad_m) + " inexact 1/m scalings");
    o.expect(bad_T == 0, std::to_string(bad_T) + " decreases in T");
    o.expect(bad_cor == 0, std::to_string(bad_cor) + " corollaries below the exact form");
    o.note(std::to_string(kTrials) + " random trajectories");
    return o;
}

Outcome c12() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::ex1_linear_LM), [](const Check& c) { return c.name.find("loss") != std::string::npos; });
    absorb(o, run_experiment(ExperimentId::ex1_median), [](const Check& c) { return c.name.find("gap") != std::string::npos; });
    return o;
}

Outcome c13() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::ex6_diag_deep));
    return o;
}

Outcome c14() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::ex5_wsgd_label_noise));
    return o;
}

Outcome c15() {
    Outcome o;
    // the zero-noise gap comparison belongs to a separate question, not this criterion
    absorb(o, run_experiment(ExperimentId::m3_noise_grid), [](const Check& c) { return c.name.rfind("noise0_", 0) != 0; });
    return o;
}

Outcome c16() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::easyhard_pipeline));
    return o;
}

Outcome c17() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::pristine_corrupt));
    return o;
}

Outcome c18() {
    Outcome o;
    absorb(o, run_experiment(ExperimentId::underparam_outliers));
    return o;
}

Outcome c19() {
    Outcome o;
    // Plain ReLU MLP (no normalization layers) on dense clusters.
    const Dataset d = make_clusters(2048, 400, 20, 10, 1.0, 5);
    const Model m = Model::mlp({20, 64, 10}, LossKind::softmax_cross_entropy);
    TrainConfig c;
    c.steps = 2000;
    c.lr = 0.1;
    c.batch_size = 100;
    c.seed = 3;
    c.eval_train_m = 1024;
    c.impute_batch = 32;
    c.test_coherence = false;
    c.trajectory_stride = 0;
    c.snapshot_drop = 0.1;
    c.snapshot_every = 100;
    const auto r = train(m, m.init_params(4), d, c);
    double worst = 0.0;
    std::size_t n = 0;
    for (const auto& s : r.log.snapshots) {
        if (!s.imputed) {
            o.expect(false, "snapshot at step " + std::to_string(s.step) + " has no imputed alpha");
            continue;
        }
        worst = std::max(worst, std::abs(s.imputed->alpha - s.coh_train.alpha) / s.coh_train.alpha);
        ++n;
    }
    o.expect(worst <= kImputedRel, "max relative deviation " + num(worst));
    o.note("max relative deviation " + num(worst) + " over " + std::to_string(n) + " snapshots");
    return o;
}

struct Criterion {
    int id;
    const char* title;
    Outcome (*run)();
    double budget;
};

const Criterion kCriteria[] = {
    {1, "alpha on L training gradients is 5/8, alpha_hat 2.5", c1, kExactBudget},
    {2, "alpha_hat on M training gradients is 1", c2, kExactBudget},
    {3, "coordinate median on L keeps only coordinate 6, on M is zero", c3, kExactBudget},
    {4, "1-d evolution: alpha 0 at w*=3, 1 at w=-1", c4, kExactBudget},
    {5, "two neurons on M: layer alpha_hat (1, 4) along the trajectory", c5, kExactBudget},
    {6, "commonality closed form matches direct alpha", c6, kExactBudget},
    {7, "alpha bounds, scale invariance, equality at 1", c7, kPropertyBudget},
    {8, "segment decomposition, zero rows, orthogonal union, difference bound", c8, kPropertyBudget},
    {9, "mini-batch forward/inverse and Monte Carlo", c9, kPropertyBudget},
    {10, "analytic vs finite-difference gradients", c10, kPropertyBudget},
    {11, "bound evaluator properties", c11, kPropertyBudget},
    {12, "L generalizes, M memorizes, median variant has no gap", c12, kBehaviorBudget},
    {13, "deep diagonal model: alpha_hat rises, smaller gap", c13, kBehaviorBudget},
    {14, "winsorized SGD with label noise: overfit falls with c", c14, kBehaviorBudget},
    {15, "M3 vs mean under noise", c15, kBehaviorBudget},
    {16, "easy/hard pipeline orderings", c16, kBehaviorBudget},
    {17, "pristine vs corrupt coherence and fitting order", c17, kBehaviorBudget},
    {18, "outlier regression with winsorized GD", c18, kBehaviorBudget},
    {19, "imputed vs direct alpha within 5%", c19, kBehaviorBudget},
};

std::vector<int> parse_selection(const std::vector<std::string>& specs) {
    std::vector<int> ids;
    for (const auto& s : specs) {
        const auto dash = s.find('-');
        const int lo = std::stoi(s.substr(0, dash));
        const int hi = dash == std::string::npos ? lo : std::stoi(s.substr(dash + 1));
        for (int i = lo; i <= hi; ++i) ids.push_back(i);
    }
    return ids;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("acceptance criteria");
    std::vector<std::string> sel;
    bool verbose = false;
    app.add_option("--criterion,-c", sel, "criterion number or range, e.g. 7-11");
    app.add_flag("--verbose,-v", verbose, "print passing details");
    CLI11_PARSE(app, argc, argv);

    std::vector<int> ids = parse_selection(sel);
    if (ids.empty())
        for (const auto& c : kCriteria) ids.push_back(c.id);

    bool all = true;
    double property_total = 0.0;
    bool any_property = false;
    for (int id : ids) {
        const auto it = std::find_if(std::begin(kCriteria), std::end(kCriteria), [id](const Criterion& c) { return c.id == id; });
        if (it == std::end(kCriteria)) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it->run();
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (it->budget == kPropertyBudget) {
            property_total += secs;
            any_property = true;
        } else {
            o.expect(secs < it->budget, "runtime " + num(secs) + " s over budget " + num(it->budget) + " s");
        }
        all = all && o.pass;
        std::printf("[%s] %d. %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", it->id, it->title, secs);
        for (const auto& n : o.notes)
            if (verbose || !o.pass) std::printf("       %s\n", n.c_str());
        std::fflush(stdout);
    }
    if (any_property) {
        const bool ok = property_total < kPropertyBudget;
        all = all && ok;
        std::printf("[%s] property suites total %.2f s (budget %.0f s)\n", ok ? "PASS" : "FAIL", property_total,
                    kPropertyBudget);
    }
    return all ? 0 : 1;
}
