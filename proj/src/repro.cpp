#include "cohgrad/repro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "cohgrad/aggregators.hpp"
#include "cohgrad/coherence.hpp"
#include "cohgrad/datasets.hpp"
#include "cohgrad/io.hpp"
#include "cohgrad/models.hpp"
#include "cohgrad/trainer.hpp"

namespace cohgrad {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct IdName {
    ExperimentId id;
    const char* name;
};

constexpr IdName kNames[] = {
    {ExperimentId::ex1_linear_LM, "ex1_linear_LM"},
    {ExperimentId::ex1_median, "ex1_median"},
    {ExperimentId::ex5_wsgd_label_noise, "ex5_wsgd_label_noise"},
    {ExperimentId::ex5_wsgd_pixel_noise, "ex5_wsgd_pixel_noise"},
    {ExperimentId::m3_noise_grid, "m3_noise_grid"},
    {ExperimentId::ex6_diag_deep, "ex6_diag_deep"},
    {ExperimentId::ex7_two_neurons, "ex7_two_neurons"},
    {ExperimentId::ex7_adversarial_heatmap, "ex7_adversarial_heatmap"},
    {ExperimentId::ex8_two_neurons_memorize, "ex8_two_neurons_memorize"},
    {ExperimentId::easyhard_pipeline, "easyhard_pipeline"},
    {ExperimentId::pristine_corrupt, "pristine_corrupt"},
    {ExperimentId::evolution_1d, "evolution_1d"},
    {ExperimentId::underparam_outliers, "underparam_outliers"},
};

}  // namespace

const std::vector<ExperimentId>& all_experiments() {
    static const std::vector<ExperimentId> ids = [] {
        std::vector<ExperimentId> v;
        for (const auto& n : kNames) v.push_back(n.id);
        return v;
    }();
    return ids;
}

const char* to_string(ExperimentId id) {
    for (const auto& n : kNames) {
        if (n.id == id) return n.name;
    }
    return "?";
}

ExperimentId parse_experiment(std::string_view name) {
    for (const auto& n : kNames) {
        if (name == n.name) return n.id;
    }
    std::string msg = "unknown experiment '" + std::string(name) + "'; valid ids:";
    for (const auto& n : kNames) msg += std::string(" ") + n.name;
    throw std::invalid_argument(msg);
}

const char* to_string(Relation r) {
    switch (r) {
        case Relation::less: return "<";
        case Relation::less_equal: return "<=";
        case Relation::greater: return ">";
        case Relation::greater_equal: return ">=";
        case Relation::approx: return "~=";
    }
    return "?";
}

Check make_check(std::string name, double observed, Relation rel, double expected, double tolerance) {
    Check c;
    c.name = std::move(name);
    c.observed = observed;
    c.relation = rel;
    c.expected = expected;
    c.tolerance = tolerance;
    switch (rel) {
        case Relation::less: c.pass = observed < expected; break;
        case Relation::less_equal: c.pass = observed <= expected; break;
        case Relation::greater: c.pass = observed > expected; break;
        case Relation::greater_equal: c.pass = observed >= expected; break;
        case Relation::approx: c.pass = std::abs(observed - expected) <= tolerance; break;
    }
    // nan compares false everywhere, so it already fails.
    return c;
}

bool Verdict::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

}  // namespace

json to_json(const Verdict& v) {
    json j;
    j["id"] = to_string(v.id);
    j["seed"] = v.seed;
    j["pass"] = v.pass();
    j["schema_version"] = kSchemaVersion;
    j["config"] = v.config;
    json checks = json::array();
    for (const auto& c : v.checks) {
        checks.push_back({{"name", c.name},
                          {"relation", to_string(c.relation)},
                          {"expected", num(c.expected)},
                          {"observed", num(c.observed)},
                          {"tolerance", num(c.tolerance)},
                          {"pass", c.pass}});
    }
    j["checks"] = checks;
    j["reports"] = v.reports;
    json arts = json::array();
    for (const auto& p : v.artifacts) arts.push_back(p.generic_string());
    j["artifacts"] = arts;
    return j;
}

// ---------------------------------------------------------------------------
// configs

json default_config(ExperimentId id) {
    switch (id) {
        case ExperimentId::ex1_linear_LM:
        case ExperimentId::ex1_median:
            return {{"seed", 0}, {"lr", 0.1}, {"steps", 2000}};
        case ExperimentId::ex6_diag_deep:
            return {{"seed", 0}, {"lr", 0.1}, {"steps", 3000}, {"min_ratio", 10.0}};
        case ExperimentId::ex7_two_neurons:
            return {{"seed", 0}, {"lr", 0.1}, {"steps", 5000}, {"adversarial", {0.1, 0.2}}};
        case ExperimentId::ex7_adversarial_heatmap:
            return {{"seed", 0}, {"lr", 0.1}, {"steps", 5000}, {"grid", 21}, {"lo", 0.01}, {"hi", 0.5}};
        case ExperimentId::ex8_two_neurons_memorize:
            return {{"seed", 0}, {"lr", 0.1}, {"steps", 200}, {"loss_floor", 1e-12}};
        case ExperimentId::evolution_1d:
            return {{"seed", 0}, {"w_lo", -3.0}, {"w_hi", 5.0}, {"w_points", 801}};
        case ExperimentId::ex5_wsgd_label_noise:
        case ExperimentId::ex5_wsgd_pixel_noise:
            return {{"seed", 1},
                    {"layout", "sparse"},
                    {"dims", 100},
                    {"spread", 1.0},
                    {"n_train", 200},
                    {"n_test", 500},
                    {"classes", 10},
                    {"class_features", 10},
                    {"active_prob", 1.0},
                    {"pool", 0},
                    {"idiosyncratic", 0},
                    {"prototype_features", 40},
                    {"flip_prob", 0.1},
                    {"hidden", 64},
                    {"lr", 0.2},
                    {"batch", 100},
                    {"steps", 1000},
                    {"noise", {0.0, 0.25, 0.5, 0.75, 1.0}},
                    {"c", {0.0, 1.0, 2.0, 4.0, 8.0}},
                    {"tail_fraction", 0.2},
                    {"tolerance", 0.01}};
        case ExperimentId::m3_noise_grid:
            return {{"seed", 3},
                    {"n_train", 500},
                    {"n_test", 500},
                    {"classes", 10},
                    {"class_features", 10},
                    {"active_prob", 1.0},
                    {"pool", 2000},
                    {"idiosyncratic", 5},
                    {"hidden", 64},
                    {"lr", 0.1},
                    {"steps", 2000},
                    {"micro_batch", 1},
                    {"noise", {0.0, 0.5, 1.0}}};
        case ExperimentId::pristine_corrupt:
            return {{"seed", 3},
                    {"n_train", 500},
                    {"n_test", 500},
                    {"classes", 10},
                    {"class_features", 10},
                    {"active_prob", 1.0},
                    {"pool", 2000},
                    {"idiosyncratic", 5},
                    {"hidden", 64},
                    {"lr", 0.1},
                    {"batch", 100},
                    {"steps", 1500},
                    {"noise", 0.5},
                    {"snapshot_every", 25},
                    {"threshold", 0.9}};
        case ExperimentId::easyhard_pipeline:
            return {{"seed", 7},
                    {"n_train", 2000},
                    {"n_test", 400},
                    {"dims", 20},
                    {"classes", 10},
                    {"spread", 1.0},
                    {"hidden", 64},
                    {"lr", 0.1},
                    {"batch", 100},
                    {"runs", 8},
                    {"target_acc", 0.5},
                    {"max_probe_steps", 2000},
                    {"easy_max", 3},
                    {"hard_min", 5},
                    {"steps", 2000},
                    {"probe_examples", 10},
                    {"probe_loss", 0.05}};
        case ExperimentId::underparam_outliers:
            return {{"seed", 0},
                    {"m", 100},
                    {"sigma", 0.1},
                    {"outliers", 10},
                    {"c", 10.0},
                    {"lr", 0.1},
                    {"steps", 2000},
                    {"sigmas", {0.1, 1.0, 10.0}},
                    {"max_slope_error", 0.2}};
    }
    throw std::invalid_argument("default_config: bad experiment id");
}

namespace {

bool same_kind(const json& a, const json& b) {
    if (a.is_number_float()) return b.is_number();
    if (a.is_number_integer()) return b.is_number_integer() && (a.is_number_unsigned() ? b.get<long long>() >= 0 : true);
    return a.type() == b.type();
}

void merge_into(json& base, const json& over, const std::string& path) {
    if (!over.is_object()) {
        throw std::invalid_argument("overrides must be an object" + (path.empty() ? "" : " at '" + path + "'"));
    }
    for (auto it = over.begin(); it != over.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
        json& slot = base[it.key()];
        const json& v = it.value();
        if (slot.is_object()) {
            merge_into(slot, v, key);
            continue;
        }
        if (slot.is_array()) {
            if (!v.is_array() || v.empty()) {
                throw std::invalid_argument("config key '" + key + "' expects a non-empty list");
            }
            for (const auto& e : v) {
                if (!same_kind(slot.front(), e)) {
                    throw std::invalid_argument("config key '" + key + "' has an element of the wrong type");
                }
            }
            slot = v;
            continue;
        }
        if (!same_kind(slot, v)) {
            throw std::invalid_argument("config key '" + key + "' expects " + std::string(slot.type_name()) +
                                        ", got " + std::string(v.type_name()));
        }
        slot = slot.is_number_float() ? json(v.get<double>()) : v;
    }
}

}  // namespace

json apply_overrides(const json& defaults, const json& overrides) {
    json out = defaults;
    if (overrides.is_null()) return out;
    merge_into(out, overrides, "");
    return out;
}

// ---------------------------------------------------------------------------
// shared plumbing

namespace {

class Ctx {
public:
    Ctx(ExperimentId id, json cfg, fs::path dir) : cfg_(std::move(cfg)), dir_(std::move(dir)) {
        v.id = id;
        v.config = cfg_;
        v.seed = cfg_.at("seed").get<std::uint64_t>();
        if (!dir_.empty()) fs::create_directories(dir_);
    }

    double f(const char* k) const { return cfg_.at(k).get<double>(); }
    std::size_t z(const char* k) const { return cfg_.at(k).get<std::size_t>(); }
    Vec64 list(const char* k) const { return cfg_.at(k).get<Vec64>(); }
    bool has(const char* k) const { return cfg_.contains(k); }
    std::string s(const char* k) const { return cfg_.at(k).get<std::string>(); }
    std::uint64_t seed() const { return v.seed; }

    bool writing() const { return !dir_.empty(); }

    /// Registers and returns an artifact path, or nothing when not writing.
    std::optional<fs::path> artifact(const std::string& name) {
        if (!writing()) return std::nullopt;
        fs::path p = dir_ / name;
        v.artifacts.push_back(p);
        return p;
    }

    void snapshots(const std::string& name, const Model& model, const RunLog& log, const TrainConfig& tc) {
        if (auto p = artifact(name + "_snapshots.csv")) write_snapshots_csv(*p, model, log, tc);
    }

    void check(std::string name, double observed, Relation rel, double expected, double tol = 0.0) {
        v.checks.push_back(make_check(std::move(name), observed, rel, expected, tol));
    }

    Verdict finish() {
        if (writing()) {
            fs::path p = dir_ / "verdict.json";
            v.artifacts.push_back(p);
            write_text(p, to_json(v).dump(2) + "\n");
        }
        return std::move(v);
    }

    Verdict v;

private:
    json cfg_;
    fs::path dir_;
};

double peak_alpha_hat(const RunLog& log) {
    double best = 0.0;
    for (const auto& s : log.snapshots) best = std::max(best, s.coh_train.alpha_hat);
    return best;
}

double final_gap(const RunLog& log) {
    const auto& s = log.snapshots.back();
    return s.test.loss - s.train.loss;
}

TrainConfig full_batch(std::size_t steps, double lr, std::uint64_t seed) {
    TrainConfig tc;
    tc.steps = steps;
    tc.lr = lr;
    tc.seed = seed;
    tc.batch_size = 0;
    return tc;
}

SparseClusterSpec sparse_spec(const Ctx& c) {
    SparseClusterSpec sp;
    sp.n_train = c.z("n_train");
    sp.n_test = c.z("n_test");
    sp.classes = c.z("classes");
    sp.class_features = c.z("class_features");
    sp.active_prob = c.f("active_prob");
    sp.pool = c.z("pool");
    sp.idiosyncratic = c.z("idiosyncratic");
    if (c.has("prototype_features")) {
        sp.prototype_features = c.z("prototype_features");
        sp.flip_prob = c.f("flip_prob");
    }
    return sp;
}

std::string tag_label(double v) {
    std::ostringstream os;
    os << std::lround(v * 100.0);
    return os.str();
}

// ---------------------------------------------------------------------------
// toy tables

void run_ex1_linear(Ctx& c) {
    const auto tc = full_batch(c.z("steps"), c.f("lr"), c.seed());
    const Model model = Model::linear(6);
    const Dataset L = dataset_L();
    const Dataset M = dataset_M();
    const auto rl = train(model, model.init_params(c.seed()), L, tc);
    const auto rm = train(model, model.init_params(c.seed()), M, tc);
    c.snapshots("L", model, rl.log, tc);
    c.snapshots("M", model, rm.log, tc);

    c.check("alpha_hat_L_initial", rl.log.snapshots.front().coh_train.alpha_hat, Relation::approx, 2.5, 1e-9);
    c.check("alpha_hat_M_initial", rm.log.snapshots.front().coh_train.alpha_hat, Relation::approx, 1.0, 1e-9);
    double dev_l = 0.0;
    double dev_m = 0.0;
    for (const auto& s : rl.log.snapshots) {
        if (s.train.loss > 1e-12) dev_l = std::max(dev_l, std::abs(s.coh_train.alpha_hat - 2.5));
    }
    for (const auto& s : rm.log.snapshots) {
        if (s.train.loss > 1e-12) dev_m = std::max(dev_m, std::abs(s.coh_train.alpha_hat - 1.0));
    }
    c.v.reports["alpha_hat_L_max_deviation"] = dev_l;
    c.v.reports["alpha_hat_M_max_deviation"] = dev_m;
    c.check("L_test_loss", rl.log.snapshots.back().test.loss, Relation::less, 0.1);
    c.check("M_train_loss", rm.log.snapshots.back().train.loss, Relation::less, 1e-3);
    c.check("M_test_loss", rm.log.snapshots.back().test.loss, Relation::greater_equal, 0.4);
}

void run_ex1_median(Ctx& c) {
    auto tc = full_batch(c.z("steps"), c.f("lr"), c.seed());
    tc.aggregator = Aggregator::winsorized(50.0);
    const Model model = Model::linear(6);
    const Vec64 w0 = model.init_params(c.seed());
    const auto rl = train(model, w0, dataset_L(), tc);
    const auto rm = train(model, w0, dataset_M(), tc);
    c.snapshots("L", model, rl.log, tc);
    c.snapshots("M", model, rm.log, tc);

    c.check("L_abs_gap", std::abs(final_gap(rl.log)), Relation::less, 1e-6);
    c.check("M_abs_gap", std::abs(final_gap(rm.log)), Relation::less, 1e-6);
    double moved = 0.0;
    for (std::size_t i = 0; i < w0.size(); ++i) moved = std::max(moved, std::abs(rm.params[i] - w0[i]));
    c.check("M_max_param_change", moved, Relation::approx, 0.0, 0.0);
    c.v.reports["L_final_params"] = rl.params;
}

void run_ex6(Ctx& c) {
    auto tc = full_batch(c.z("steps"), c.f("lr"), c.seed());
    const Dataset L = dataset_L();
    const Model deep = Model::diag_deep(6);
    auto td = tc;
    td.trace = {0, 5, 6, 11};
    const auto rd = train(deep, deep.init_params(c.seed()), L, td);
    tc.trace = {0, 5};
    const Model lin = Model::linear(6);
    const auto rl = train(lin, lin.init_params(c.seed()), L, tc);
    c.snapshots("diag_deep", deep, rd.log, td);
    c.snapshots("linear", lin, rl.log, tc);

    c.check("alpha_hat_initial", rd.log.snapshots.front().coh_train.alpha_hat, Relation::approx, 2.5, 1e-9);
    c.check("alpha_hat_peak", peak_alpha_hat(rd.log), Relation::greater_equal, 3.5);
    c.check("deep_gap_below_linear_gap", final_gap(rd.log), Relation::less, final_gap(rl.log));
    // Effective weight of feature j is u_j * w_j.
    const double e1 = rd.params[0] * rd.params[6];
    const double e6 = rd.params[5] * rd.params[11];
    c.check("effective_w6_over_w1", e6 / e1, Relation::greater_equal, c.f("min_ratio"));
    c.v.reports["deep_gap"] = final_gap(rd.log);
    c.v.reports["linear_gap"] = final_gap(rl.log);
}

constexpr std::size_t kW1 = 11;
constexpr std::size_t kW2 = 12;

TrainResult two_neuron_run(double w1, double w2, double lr, std::size_t steps, const Dataset& d, std::uint64_t seed,
                           bool instrument) {
    const Model model = Model::two_neuron();
    Vec64 p = model.init_params(seed);
    p[kW1] = w1;
    p[kW2] = w2;
    auto tc = full_batch(steps, lr, seed);
    tc.trace = {kW1, kW2};
    if (!instrument) {
        tc.trajectory_stride = 0;
        tc.test_coherence = false;
        tc.snapshot_drop = 0.999;
    }
    return train(model, p, d, tc);
}

void run_ex7(Ctx& c) {
    const Dataset L = dataset_L();
    const Model model = Model::two_neuron();
    const double lr = c.f("lr");
    const std::size_t steps = c.z("steps");
    auto tc = full_batch(steps, lr, c.seed());
    tc.trace = {kW1, kW2};

    std::vector<double> starts = {0.01};
    for (double a : c.list("adversarial")) starts.push_back(a);
    for (double w1 : starts) {
        const auto r = two_neuron_run(w1, 0.01, lr, steps, L, c.seed(), true);
        const std::string name = "w1_" + format_double(w1);
        c.snapshots(name, model, r.log, tc);
        c.check(name + "_final_w2_over_w1", std::abs(r.params[kW2]) / std::abs(r.params[kW1]), Relation::greater, 1.0);
        c.v.reports[name + "_test_loss"] = r.log.snapshots.back().test.loss;
    }
}

void run_heatmap(Ctx& c) {
    const Dataset L = dataset_L();
    const std::size_t n = c.z("grid");
    if (n < 2) throw std::invalid_argument("heatmap grid needs at least 2 points per axis");
    const double lo = c.f("lo");
    const double hi = c.f("hi");
    std::optional<CsvWriter> out;
    if (auto p = c.artifact("heatmap.csv")) {
        out.emplace(*p, std::vector<std::string>{"w1_init", "w2_init", "train_loss", "test_loss", "w1_final",
                                                 "w2_final"});
    }
    std::size_t finite = 0;
    std::size_t good_wins = 0;
    double corner = 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w1 = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            const double w2 = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
            const auto r = two_neuron_run(w1, w2, c.f("lr"), c.z("steps"), L, c.seed(), false);
            const auto& s = r.log.snapshots.back();
            if (std::isfinite(s.test.loss)) ++finite;
            if (std::abs(r.params[kW2]) > std::abs(r.params[kW1])) ++good_wins;
            if (i == 0 && j == 0) corner = s.test.loss;
            worst = std::max(worst, s.test.loss);
            if (out) {
                out->cell(w1).cell(w2).cell(s.train.loss).cell(s.test.loss).cell(r.params[kW1]).cell(r.params[kW2]);
                out->end_row();
            }
        }
    }
    c.check("finite_cells", static_cast<double>(finite), Relation::approx, static_cast<double>(n * n), 0.0);
    c.check("default_corner_test_loss", corner, Relation::less, 0.1);
    c.check("worst_test_loss_above_corner", worst, Relation::greater, corner);
    c.v.reports["fraction_good_neuron_wins"] = static_cast<double>(good_wins) / static_cast<double>(n * n);
}

void run_ex8(Ctx& c) {
    const Model model = Model::two_neuron();
    auto tc = full_batch(c.z("steps"), c.f("lr"), c.seed());
    tc.snapshot_every = 1;
    const auto r = train(model, model.init_params(c.seed()), dataset_M(), tc);
    c.snapshots("M", model, r.log, tc);
    // Once the residuals reach round-off the examples stop being exact mirror
    // images of each other, so only the part above the floor is checked.
    double d1 = 0.0;
    double d2 = 0.0;
    std::size_t used = 0;
    for (const auto& s : r.log.snapshots) {
        if (!(s.train.loss > c.f("loss_floor"))) continue;
        ++used;
        for (const auto& seg : s.coh_train.per_segment) {
            if (seg.name == "layer1") d1 = std::max(d1, std::abs(seg.alpha_hat - 1.0));
            if (seg.name == "layer2") d2 = std::max(d2, std::abs(seg.alpha_hat - 4.0));
        }
    }
    c.check("layer1_alpha_hat_max_deviation_from_1", d1, Relation::less_equal, 1e-6);
    c.check("layer2_alpha_hat_max_deviation_from_4", d2, Relation::less_equal, 1e-6);
    c.check("snapshots_checked", static_cast<double>(used), Relation::greater_equal, 100.0);
}

// Two examples (x, y) = (2, 3) and (1, 9) fit by y = w x.
void run_evolution(Ctx& c) {
    const Model model = Model::linear(1);
    Dataset d;
    d.train = {Example{{2.0}, {3.0}, Tag::none}, Example{{1.0}, {9.0}, Tag::none}};
    const double x1 = 2, y1 = 3, x2 = 1, y2 = 9;
    const double w_star = (y1 * x1 + y2 * x2) / (x1 * x1 + x2 * x2);
    const double w_dag = (y1 * x1 - y2 * x2) / (x1 * x1 - x2 * x2);
    auto alpha_at = [&](double w) { return alpha(model.per_example_grads(Vec64{w}, d.train)).alpha; };

    c.check("w_star", w_star, Relation::approx, 3.0, 0.0);
    c.check("w_dagger", w_dag, Relation::approx, -1.0, 0.0);
    c.check("alpha_at_w_star", alpha_at(w_star), Relation::approx, 0.0, 0.0);
    c.check("alpha_at_w_dagger", alpha_at(w_dag), Relation::approx, 1.0, 0.0);

    const std::size_t n = c.z("w_points");
    if (n < 2) throw std::invalid_argument("evolution_1d needs at least 2 grid points");
    const double lo = c.f("w_lo");
    const double hi = c.f("w_hi");
    std::optional<CsvWriter> out;
    if (auto p = c.artifact("alpha_vs_w.csv")) out.emplace(*p, std::vector<std::string>{"w", "alpha", "loss"});
    double amin = 2.0;
    double amax = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        const double a = alpha_at(w);
        amin = std::min(amin, a);
        amax = std::max(amax, a);
        if (out) {
            const double loss = 0.5 * (model.loss(Vec64{w}, d.train[0]) + model.loss(Vec64{w}, d.train[1]));
            out->cell(w).cell(a).cell(loss);
            out->end_row();
        }
    }
    c.check("grid_alpha_min_not_below_w_star", amin, Relation::greater_equal, alpha_at(w_star));
    c.check("grid_alpha_max_not_above_w_dagger", amax, Relation::less_equal, alpha_at(w_dag));
}

// ---------------------------------------------------------------------------
// aggregator grids

struct TailMetrics {
    double train_acc = 0.0;
    double test_acc = 0.0;
};

/// Accuracies averaged over snapshots in the last `tail` fraction of steps.
TailMetrics tail_average(const RunLog& log, std::size_t steps, double tail) {
    TailMetrics t;
    std::size_t k = 0;
    const double from = (1.0 - tail) * static_cast<double>(steps);
    for (const auto& s : log.snapshots) {
        if (static_cast<double>(s.step) >= from) {
            t.train_acc += s.train.accuracy;
            t.test_acc += s.test.accuracy;
            ++k;
        }
    }
    if (k > 0) {
        t.train_acc /= static_cast<double>(k);
        t.test_acc /= static_cast<double>(k);
    }
    return t;
}

void run_wsgd(Ctx& c, bool label_noise) {
    const std::string layout = c.s("layout");
    if (layout != "sparse" && layout != "gaussian") throw std::invalid_argument("layout must be sparse or gaussian");
    const bool dense = layout == "gaussian";
    const Dataset base = dense ? make_clusters(c.z("n_train"), c.z("n_test"), c.z("dims"), c.z("classes"), c.f("spread"), c.seed())
                               : make_sparse_clusters(sparse_spec(c), c.seed());
    const std::size_t steps = c.z("steps");
    const Vec64 noises = c.list("noise");
    const Vec64 cs = c.list("c");
    const double tol = c.f("tolerance");
    const double tail = c.f("tail_fraction");
    std::optional<CsvWriter> out;
    if (auto p = c.artifact("wsgd_grid.csv")) {
        out.emplace(*p, std::vector<std::string>{"noise", "c", "train_acc", "test_acc", "overfit", "diverged"});
    }
    // train accuracy at the largest c, per noise level
    std::vector<double> top_c_acc;
    for (double nz : noises) {
        const Dataset d = label_noise ? with_label_noise(base, nz, c.seed() + 1)
                          : dense     ? with_pixel_noise(base, nz, c.seed() + 1)
                                      : with_sparse_noise(base, nz, c.seed() + 1);
        const Model model = Model::mlp({d.input_dim(), c.z("hidden"), d.meta.num_classes}, LossKind::softmax_cross_entropy);
        std::vector<double> overfit;
        for (double cv : cs) {
            TrainConfig tc;
            tc.steps = steps;
            tc.lr = c.f("lr");
            tc.batch_size = c.z("batch");
            tc.aggregator = cv == 0.0 ? Aggregator::mean() : Aggregator::winsorized(cv);
            tc.seed = c.seed() + 2;
            tc.eval_train_m = 100;
            tc.eval_test_m = 100;
            tc.test_coherence = false;
            tc.trajectory_stride = 0;
            tc.tagged_metrics = false;
            tc.snapshot_drop = 0.999;
            tc.snapshot_every = std::max<std::size_t>(1, steps / 20);
            const auto r = train(model, model.init_params(c.seed() + 4), d, tc);
            const auto t = tail_average(r.log, steps, tail);
            overfit.push_back(t.train_acc - t.test_acc);
            if (cv == cs.back()) top_c_acc.push_back(t.train_acc);
            c.snapshots("noise" + tag_label(nz) + "_c" + format_double(cv), model, r.log, tc);
            if (out) {
                out->cell(nz).cell(cv).cell(t.train_acc).cell(t.test_acc).cell(t.train_acc - t.test_acc);
                out->cell(r.log.diverged ? "1" : "0");
                out->end_row();
            }
        }
        for (std::size_t k = 1; k < cs.size(); ++k) {
            c.check("noise" + tag_label(nz) + "_overfit_c" + format_double(cs[k]) + "_le_c" + format_double(cs[k - 1]),
                    overfit[k], Relation::less_equal, overfit[k - 1] + tol);
        }
    }
    if (label_noise && noises.size() >= 2) {
        c.check("top_c_train_acc_max_noise_below_min_noise", top_c_acc.back(), Relation::less, top_c_acc.front());
    }
}

void run_m3(Ctx& c) {
    const Dataset base = make_sparse_clusters(sparse_spec(c), c.seed());
    const double chance = 1.0 / static_cast<double>(base.meta.num_classes);
    std::optional<CsvWriter> out;
    if (auto p = c.artifact("m3_grid.csv")) {
        out.emplace(*p, std::vector<std::string>{"noise", "aggregator", "train_acc", "test_acc", "gap",
                                                 "loss_gap", "pristine_acc", "corrupt_acc"});
    }
    for (double nz : c.list("noise")) {
        const Dataset d = with_sparse_noise(base, nz, c.seed() + 1);
        const Model model = Model::mlp({d.input_dim(), c.z("hidden"), d.meta.num_classes}, LossKind::softmax_cross_entropy);
        double gap_m3 = 0.0;
        double gap_mean = 0.0;
        for (bool m3 : {true, false}) {
            TrainConfig tc;
            tc.steps = c.z("steps");
            tc.lr = c.f("lr");
            // mean over the same three micro-batches' worth of examples
            if (m3) {
                tc.aggregator = Aggregator::m3();
                tc.micro_batch = c.z("micro_batch");
            } else {
                tc.batch_size = 3 * c.z("micro_batch");
            }
            tc.seed = c.seed();
            tc.eval_train_m = 200;
            tc.eval_test_m = 200;
            tc.trajectory_stride = 0;
            tc.snapshot_every = std::max<std::size_t>(1, tc.steps / 10);
            const auto r = train(model, model.init_params(c.seed() + 2), d, tc);
            const auto& s = r.log.snapshots.back();
            const std::string name = "noise" + tag_label(nz) + (m3 ? "_m3" : "_mean");
            c.snapshots(name, model, r.log, tc);
            const double pa = s.tagged.pristine ? s.tagged.pristine->accuracy : std::nan("");
            const double ca = s.tagged.corrupt ? s.tagged.corrupt->accuracy : std::nan("");
            // accuracy gap, the quantity quoted for real data
            (m3 ? gap_m3 : gap_mean) = s.train.accuracy - s.test.accuracy;
            c.v.reports[name + "_loss_gap"] = s.test.loss - s.train.loss;
            if (out) {
                out->cell(nz).cell(m3 ? "m3" : "mean").cell(s.train.accuracy).cell(s.test.accuracy);
                out->cell(s.train.accuracy - s.test.accuracy).cell(s.test.loss - s.train.loss).cell(pa).cell(ca);
                out->end_row();
            }
            if (nz == 1.0) {
                if (m3) {
                    c.check(name + "_train_acc_minus_chance", s.train.accuracy - chance, Relation::approx, 0.0, 0.05);
                } else {
                    c.check(name + "_train_acc", s.train.accuracy, Relation::greater, 0.9);
                }
            } else if (nz > 0.0 && m3) {
                c.check(name + "_pristine_acc", pa, Relation::greater, 0.9);
                c.check(name + "_corrupt_acc_minus_chance", ca - chance, Relation::approx, 0.0, 0.10);
            }
        }
        if (nz == 0.0) {
            c.check("noise0_gap_m3_le_mean", gap_m3, Relation::less_equal, gap_mean);
        }
    }
}

// ---------------------------------------------------------------------------
// pristine / corrupt and easy / hard

std::size_t first_step_at(const RunLog& log, double threshold, bool pristine) {
    for (const auto& s : log.snapshots) {
        const auto& t = pristine ? s.tagged.pristine : s.tagged.corrupt;
        if (t && t->accuracy >= threshold) return s.step;
    }
    return std::numeric_limits<std::size_t>::max();
}

void run_pristine_corrupt(Ctx& c) {
    const Dataset d = with_label_noise(make_sparse_clusters(sparse_spec(c), c.seed()), c.f("noise"), c.seed() + 1);
    const Model model = Model::mlp({d.input_dim(), c.z("hidden"), d.meta.num_classes}, LossKind::softmax_cross_entropy);
    TrainConfig tc;
    tc.steps = c.z("steps");
    tc.lr = c.f("lr");
    tc.batch_size = c.z("batch");
    tc.seed = c.seed();
    tc.eval_train_m = 200;
    tc.eval_test_m = 200;
    tc.trajectory_stride = 0;
    tc.snapshot_every = c.z("snapshot_every");
    const auto r = train(model, model.init_params(c.seed() + 2), d, tc);
    c.snapshots("run", model, r.log, tc);
    double pp = 0.0;
    double cp = 0.0;
    for (const auto& s : r.log.snapshots) {
        if (s.tagged.pristine) pp = std::max(pp, s.tagged.pristine->coherence.alpha_hat);
        if (s.tagged.corrupt) cp = std::max(cp, s.tagged.corrupt->coherence.alpha_hat);
    }
    c.check("pristine_peak_alpha_hat_above_corrupt", pp, Relation::greater, cp);
    const double th = c.f("threshold");
    const auto sp = first_step_at(r.log, th, true);
    const auto sc = first_step_at(r.log, th, false);
    auto as_d = [](std::size_t s) {
        return s == std::numeric_limits<std::size_t>::max() ? std::numeric_limits<double>::infinity()
                                                            : static_cast<double>(s);
    };
    c.check("pristine_reaches_threshold_first", as_d(sp), Relation::less, as_d(sc));
    c.v.reports["pristine_peak_alpha_hat"] = pp;
    c.v.reports["corrupt_peak_alpha_hat"] = cp;
}

/// Steps of full-batch GD on a single example until its loss drops below `target`.
std::size_t steps_to_fit(const Model& model, const Vec64& w0, const Example& ex, double lr, double target,
                         std::size_t cap) {
    Vec64 w = w0;
    Vec64 g(model.num_params());
    for (std::size_t t = 0; t < cap; ++t) {
        if (model.loss_and_grad(w, ex, g) < target) return t;
        axpy(-lr, g, w);
    }
    return cap;
}

void run_easyhard(Ctx& c) {
    const Dataset d = make_clusters(c.z("n_train"), c.z("n_test"), c.z("dims"), c.z("classes"), c.f("spread"), c.seed());
    const std::size_t n = d.train.size();
    const Model model = Model::mlp({d.input_dim(), c.z("hidden"), d.meta.num_classes}, LossKind::softmax_cross_entropy);
    const std::size_t runs = c.z("runs");
    const double target = c.f("target_acc");
    const std::size_t cap = c.z("max_probe_steps");

    // Hardness: number of seeded runs (stopped at the target train accuracy)
    // that misclassify the example.
    std::vector<std::size_t> score(n, 0);
    Vec64 stop_steps;
    for (std::size_t run = 0; run < runs; ++run) {
        const std::uint64_t rs = c.seed() * 1000 + run;
        Vec64 w = model.init_params(rs);
        Rng rng(rs);
        auto order = rng.permutation(n);
        std::size_t pos = 0;
        const std::size_t b = c.z("batch");
        std::size_t t = 0;
        Mat64 g;
        for (; t < cap; ++t) {
            if (t % 10 == 0 && evaluate(model, w, d.train).accuracy >= target) break;
            std::vector<std::size_t> idx;
            for (std::size_t k = 0; k < b; ++k) {
                if (pos == n) {
                    rng.shuffle(order);
                    pos = 0;
                }
                idx.push_back(order[pos++]);
            }
            g = model.per_example_grads(w, d.train, idx);
            axpy(-c.f("lr"), column_means(g), w);
        }
        stop_steps.push_back(static_cast<double>(t));
        for (std::size_t i = 0; i < n; ++i) {
            if (!model.correct(w, d.train[i])) ++score[i];
        }
    }
    std::vector<std::size_t> easy, hard;
    for (std::size_t i = 0; i < n; ++i) {
        if (score[i] <= c.z("easy_max")) easy.push_back(i);
        if (score[i] >= c.z("hard_min")) hard.push_back(i);
    }
    if (auto p = c.artifact("hardness.csv")) {
        CsvWriter w(*p, {"index", "label", "score"});
        for (std::size_t i = 0; i < n; ++i) {
            w.cell(i).cell(argmax(d.train[i].y)).cell(score[i]);
            w.end_row();
        }
    }
    c.v.reports["easy_count"] = easy.size();
    c.v.reports["hard_count"] = hard.size();
    c.v.reports["stop_steps"] = stop_steps;
    if (easy.size() < 4 || hard.size() < 4) {
        c.check("subset_sizes_at_least_4", static_cast<double>(std::min(easy.size(), hard.size())),
                Relation::greater_equal, 4.0);
        return;
    }

    // Equal-size subsets, each split in half into train and test.
    const std::size_t k = std::min(easy.size(), hard.size()) / 2 * 2;
    Rng split(c.seed() + 11);
    split.shuffle(easy);
    split.shuffle(hard);
    easy.resize(k);
    hard.resize(k);
    auto halves = [&](const std::vector<std::size_t>& ids) {
        Dataset s;
        s.meta = d.meta;
        for (std::size_t i = 0; i < k; ++i) (i < k / 2 ? s.train : s.test).push_back(d.train[ids[i]]);
        return s;
    };
    const Dataset de = halves(easy);
    const Dataset dh = halves(hard);

    TrainConfig tc;
    tc.steps = c.z("steps");
    tc.lr = c.f("lr");
    tc.batch_size = std::min(c.z("batch"), k / 2);
    tc.seed = c.seed() + 12;
    tc.trajectory_stride = 0;
    tc.snapshot_every = std::max<std::size_t>(1, tc.steps / 20);
    const Vec64 w0 = model.init_params(c.seed() + 13);
    const auto re = train(model, w0, de, tc);
    const auto rh = train(model, w0, dh, tc);
    c.snapshots("easy", model, re.log, tc);
    c.snapshots("hard", model, rh.log, tc);

    c.check("easy_peak_alpha_hat_above_hard", peak_alpha_hat(re.log), Relation::greater, peak_alpha_hat(rh.log));
    c.check("easy_gap_below_hard_gap", final_gap(re.log), Relation::less, final_gap(rh.log));
    const double hard_on_easy = evaluate(model, rh.params, de.test).accuracy;
    const double easy_on_easy = evaluate(model, re.params, de.test).accuracy;
    c.check("hard_model_on_easy_test_below_easy_model", hard_on_easy, Relation::less, easy_on_easy);
    c.v.reports["subset_size"] = k;
    c.v.reports["easy_model_easy_test_acc"] = easy_on_easy;
    c.v.reports["hard_model_easy_test_acc"] = hard_on_easy;

    // Singleton probe, reported only.
    const std::size_t probes = std::min(c.z("probe_examples"), k / 2);
    double se = 0.0;
    double sh = 0.0;
    for (std::size_t i = 0; i < probes; ++i) {
        se += static_cast<double>(steps_to_fit(model, w0, de.train[i], c.f("lr"), c.f("probe_loss"), cap));
        sh += static_cast<double>(steps_to_fit(model, w0, dh.train[i], c.f("lr"), c.f("probe_loss"), cap));
    }
    c.v.reports["probe_mean_steps_easy"] = probes ? se / static_cast<double>(probes) : 0.0;
    c.v.reports["probe_mean_steps_hard"] = probes ? sh / static_cast<double>(probes) : 0.0;
}

// ---------------------------------------------------------------------------
// under-parameterized regression

void run_outliers(Ctx& c) {
    const Model model = Model::linear(2);
    const std::size_t m = c.z("m");
    auto tc = full_batch(c.z("steps"), c.f("lr"), c.seed());
    tc.trace = {0, 1};
    const Dataset d = outlier_regression(m, c.f("sigma"), c.z("outliers"), c.seed());
    const auto rg = train(model, model.init_params(c.seed()), d, tc);
    auto tw = tc;
    tw.aggregator = Aggregator::winsorized(c.f("c"));
    const auto rw = train(model, model.init_params(c.seed()), d, tw);
    c.snapshots("gd", model, rg.log, tc);
    c.snapshots("wgd", model, rw.log, tw);
    auto err = [](const Vec64& p) { return std::hypot(p[0] - 2.0, p[1] - 3.0); };
    c.check("wgd_slope_error", std::abs(rw.params[0] - 2.0), Relation::less, c.f("max_slope_error"));
    c.check("wgd_param_error_below_gd", err(rw.params), Relation::less, err(rg.params));
    c.v.reports["gd_params"] = rg.params;
    c.v.reports["wgd_params"] = rw.params;

    const Vec64 sigmas = c.list("sigmas");
    Vec64 peaks;
    for (double s : sigmas) {
        const Dataset clean = outlier_regression(m, s, 0, c.seed());
        const auto r = train(model, model.init_params(c.seed()), clean, tc);
        c.snapshots("sigma" + format_double(s), model, r.log, tc);
        peaks.push_back(peak_alpha_hat(r.log));
    }
    c.v.reports["peak_alpha_hat_by_sigma"] = peaks;
    for (std::size_t k = 1; k < sigmas.size(); ++k) {
        c.check("peak_alpha_hat_sigma" + format_double(sigmas[k]) + "_below_sigma" + format_double(sigmas[k - 1]),
                peaks[k], Relation::less, peaks[k - 1]);
    }
}

}  // namespace

Verdict run_experiment(ExperimentId id, const json& overrides, const fs::path& out_dir) {
    Ctx c(id, apply_overrides(default_config(id), overrides), out_dir);
    switch (id) {
        case ExperimentId::ex1_linear_LM: run_ex1_linear(c); break;
        case ExperimentId::ex1_median: run_ex1_median(c); break;
        case ExperimentId::ex5_wsgd_label_noise: run_wsgd(c, true); break;
        case ExperimentId::ex5_wsgd_pixel_noise: run_wsgd(c, false); break;
        case ExperimentId::m3_noise_grid: run_m3(c); break;
        case ExperimentId::ex6_diag_deep: run_ex6(c); break;
        case ExperimentId::ex7_two_neurons: run_ex7(c); break;
        case ExperimentId::ex7_adversarial_heatmap: run_heatmap(c); break;
        case ExperimentId::ex8_two_neurons_memorize: run_ex8(c); break;
        case ExperimentId::easyhard_pipeline: run_easyhard(c); break;
        case ExperimentId::pristine_corrupt: run_pristine_corrupt(c); break;
        case ExperimentId::evolution_1d: run_evolution(c); break;
        case ExperimentId::underparam_outliers: run_outliers(c); break;
    }
    return c.finish();
}

}  // namespace cohgrad
