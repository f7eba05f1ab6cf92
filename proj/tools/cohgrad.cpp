// Command-line front end: gen-data, train, coherence, bound, repro,
// compare-aggregators.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cohgrad/aggregators.hpp"
#include "cohgrad/bound.hpp"
#include "cohgrad/coherence.hpp"
#include "cohgrad/datasets.hpp"
#include "cohgrad/io.hpp"
#include "cohgrad/models.hpp"
#include "cohgrad/repro.hpp"
#include "cohgrad/trainer.hpp"

using namespace cohgrad;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    bool quiet = false;
};

struct DataOpts {
    std::string dataset = "clusters";
    std::size_t n_train = 2000;
    std::size_t n_test = 400;
    std::size_t dims = 20;
    std::size_t classes = 10;
    double spread = 1.0;
    std::size_t pool = 1000;
    std::size_t idiosyncratic = 5;
    std::size_t class_features = 10;
    double active_prob = 0.5;
    double sigma = 0.1;
    std::size_t outliers = 10;
    double label_noise = 0.0;
    double pixel_noise = 0.0;

    void add(CLI::App* app) {
        app->add_option("--dataset", dataset, "L, M, clusters, sparse or outliers")
            ->check(CLI::IsMember({"L", "M", "clusters", "sparse", "outliers"}))
            ->capture_default_str();
        app->add_option("--n-train", n_train, "training examples (outliers: m)")->capture_default_str();
        app->add_option("--n-test", n_test, "test examples")->capture_default_str();
        app->add_option("--dims", dims, "clusters: input dimension")->capture_default_str();
        app->add_option("--classes", classes, "number of classes")->capture_default_str();
        app->add_option("--spread", spread, "clusters: noise std")->capture_default_str();
        app->add_option("--pool", pool, "sparse: shared idiosyncratic pool size")->capture_default_str();
        app->add_option("--idiosyncratic", idiosyncratic, "sparse: pool features per example")->capture_default_str();
        app->add_option("--class-features", class_features, "sparse: features per class")->capture_default_str();
        app->add_option("--active-prob", active_prob, "sparse: class feature on-probability")->capture_default_str();
        app->add_option("--sigma", sigma, "outliers: label noise std")->capture_default_str();
        app->add_option("--outliers", outliers, "outliers: corrupted points")->capture_default_str();
        app->add_option("--label-noise", label_noise, "fraction of labels resampled")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        app->add_option("--pixel-noise", pixel_noise, "fraction of inputs replaced by noise")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
    }

    json to_json() const {
        return {{"dataset", dataset}, {"n_train", n_train},
                {"n_test", n_test},   {"dims", dims},
                {"classes", classes}, {"spread", spread},
                {"pool", pool},       {"idiosyncratic", idiosyncratic},
                {"class_features", class_features}, {"active_prob", active_prob},
                {"sigma", sigma},     {"outliers", outliers},
                {"label_noise", label_noise}, {"pixel_noise", pixel_noise}};
    }

    static DataOpts from_json(const json& j) {
        DataOpts d;
        d.dataset = j.at("dataset").get<std::string>();
        d.n_train = j.at("n_train");
        d.n_test = j.at("n_test");
        d.dims = j.at("dims");
        d.classes = j.at("classes");
        d.spread = j.at("spread");
        d.pool = j.at("pool");
        d.idiosyncratic = j.at("idiosyncratic");
        d.class_features = j.at("class_features");
        d.active_prob = j.at("active_prob");
        d.sigma = j.at("sigma");
        d.outliers = j.at("outliers");
        d.label_noise = j.at("label_noise");
        d.pixel_noise = j.at("pixel_noise");
        return d;
    }

    /// Noise-free base set.
    Dataset base(std::uint64_t seed) const {
        if (dataset == "L") return dataset_L();
        if (dataset == "M") return dataset_M();
        if (dataset == "outliers") return outlier_regression(n_train, sigma, outliers, seed);
        if (dataset == "sparse") {
            SparseClusterSpec sp;
            sp.n_train = n_train;
            sp.n_test = n_test;
            sp.classes = classes;
            sp.class_features = class_features;
            sp.active_prob = active_prob;
            sp.pool = pool;
            sp.idiosyncratic = idiosyncratic;
            return make_sparse_clusters(sp, seed);
        }
        return make_clusters(n_train, n_test, dims, classes, spread, seed);
    }

    Dataset noisy(const Dataset& d, double label, double pixel, std::uint64_t seed) const {
        if (label > 0.0 && pixel > 0.0) {
            throw std::invalid_argument("label and pixel noise are mutually exclusive");
        }
        if ((label > 0.0 || pixel > 0.0) && !d.is_classification()) {
            throw std::invalid_argument("noise injection needs a classification dataset");
        }
        if (label > 0.0) return with_label_noise(d, label, seed + 1);
        if (pixel > 0.0) {
            return dataset == "sparse" ? with_sparse_noise(d, pixel, seed + 1) : with_pixel_noise(d, pixel, seed + 1);
        }
        return d;
    }

    Dataset build(std::uint64_t seed) const { return noisy(base(seed), label_noise, pixel_noise, seed); }
};

struct ModelOpts {
    std::string kind = "auto";
    std::vector<std::size_t> hidden = {64};

    void add(CLI::App* app) {
        app->add_option("--model", kind, "linear, diag_deep, two_neuron, mlp or auto")
            ->check(CLI::IsMember({"auto", "linear", "diag_deep", "two_neuron", "mlp"}))
            ->capture_default_str();
        app->add_option("--hidden", hidden, "mlp hidden widths")->delimiter(',')->capture_default_str();
    }

    json to_json() const { return {{"model", kind}, {"hidden", hidden}}; }

    static ModelOpts from_json(const json& j) {
        ModelOpts m;
        m.kind = j.at("model").get<std::string>();
        m.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        return m;
    }

    /// auto: mlp with cross-entropy for classification, linear otherwise.
    Model build(const Dataset& d) const {
        std::string k = kind;
        if (k == "auto") k = d.is_classification() ? "mlp" : "linear";
        if (k == "linear") return Model::linear(d.input_dim());
        if (k == "diag_deep") return Model::diag_deep(d.input_dim());
        if (k == "two_neuron") return Model::two_neuron();
        std::vector<std::size_t> widths = {d.input_dim()};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(d.target_dim());
        return Model::mlp(widths, d.is_classification() ? LossKind::softmax_cross_entropy : LossKind::half_square);
    }
};

struct TrainOpts {
    TrainConfig cfg;
    std::string schedule = "constant";
    std::string aggregator = "mean";

    void add(CLI::App* app) {
        app->add_option("--steps", cfg.steps, "number of updates")->capture_default_str();
        app->add_option("--lr", cfg.lr, "step size")->capture_default_str();
        app->add_option("--schedule", schedule, "constant or linear_decay")
            ->check(CLI::IsMember({"constant", "linear_decay"}))
            ->capture_default_str();
        app->add_option("--batch", cfg.batch_size, "mini-batch size (0 = full batch)")->capture_default_str();
        app->add_option("--micro-batch", cfg.micro_batch, "m3 micro-batch size")->capture_default_str();
        app->add_option("--aggregator", aggregator, "mean, winsorized:<c>, median_of_means:<k> or m3")
            ->capture_default_str();
        app->add_option("--eval-train-m", cfg.eval_train_m, "training coherence sample (0 = all)")
            ->capture_default_str();
        app->add_option("--eval-test-m", cfg.eval_test_m, "test coherence sample (0 = all)")->capture_default_str();
        app->add_flag("!--no-test-coherence", cfg.test_coherence, "skip test-split coherence");
        app->add_option("--snapshot-drop", cfg.snapshot_drop, "relative loss drop between snapshots")
            ->capture_default_str();
        app->add_option("--snapshot-every", cfg.snapshot_every, "extra periodic snapshots (0 = off)")
            ->capture_default_str();
        app->add_option("--stride", cfg.trajectory_stride, "trajectory alpha stride (0 = off)")
            ->capture_default_str();
        app->add_option("--impute-batch", cfg.impute_batch, "also log alpha imputed from k-batches")
            ->capture_default_str();
        app->add_option("--impute-rounds", cfg.impute_rounds, "reshuffles pooled per imputation")
            ->capture_default_str();
        app->add_option("--trace", cfg.trace, "parameter indices copied into snapshots")->delimiter(',');
    }

    TrainConfig build(std::uint64_t seed) {
        cfg.schedule = schedule == "linear_decay" ? Schedule::linear_decay : Schedule::constant;
        cfg.aggregator = parse_aggregator(aggregator);
        cfg.seed = seed;
        return cfg;
    }
};

fs::path run_dir(const Common& c, const std::string& sub) {
    if (!c.out.empty()) return c.out;
    const char* root = std::getenv("COHGRAD_OUT");
    return fs::path(root != nullptr && *root != '\0' ? root : "runs") / sub;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

/// Config echo: the seed plus the options given for this subcommand, loadable
/// again through --config.
void write_config_echo(const fs::path& p, const Common& c, const CLI::App& sub) {
    std::ostringstream os;
    os << "seed=" << c.seed << "\n[" << sub.get_name() << "]\n" << sub.config_to_str(false, false);
    write_text(p, os.str());
}

json manifest(const std::string& command, const Common& c) {
    return {{"schema_version", kSchemaVersion}, {"command", command}, {"seed", c.seed}};
}

// Data and model seeds derive from the run seed.
constexpr std::uint64_t kInitOffset = 1000;

int cmd_gen_data(const Common& c, const DataOpts& d, CLI::App& app) {
    const fs::path dir = run_dir(c, "gen-data");
    fs::create_directories(dir);
    const Dataset data = d.build(c.seed);
    write_dataset_csv(data, dir);
    json m = manifest("gen-data", c);
    m["data"] = d.to_json();
    m["input_dim"] = data.input_dim();
    m["target_dim"] = data.target_dim();
    m["train_size"] = data.train.size();
    m["test_size"] = data.test.size();
    write_json(dir / "manifest.json", m);
    write_config_echo(dir / "config.toml", c, app);
    if (!c.quiet) std::cout << "wrote " << data.train.size() << " + " << data.test.size() << " examples to " << dir.string() << "\n";
    return 0;
}

struct TrainOutcome {
    Model model;
    Dataset data;
    TrainConfig cfg;
    TrainResult result;
};

TrainOutcome run_training(const DataOpts& d, const ModelOpts& mo, TrainConfig cfg, std::uint64_t seed) {
    Dataset data = d.build(seed);
    Model model = mo.build(data);
    Vec64 w0 = model.init_params(seed + kInitOffset);
    cfg.validate(data.train.size());
    auto r = train(model, std::move(w0), data, cfg);
    return {std::move(model), std::move(data), std::move(cfg), std::move(r)};
}

int cmd_train(const Common& c, const DataOpts& d, const ModelOpts& mo, TrainOpts& to, CLI::App& app) {
    const fs::path dir = run_dir(c, "train");
    fs::create_directories(dir);
    const TrainConfig cfg = to.build(c.seed);
    auto out = run_training(d, mo, cfg, c.seed);
    write_snapshots_csv(dir / "snapshots.csv", out.model, out.result.log, out.cfg);
    write_trajectory_csv(dir / "trajectory.csv", out.result.log);
    {
        CsvWriter w(dir / "params.csv", {"index", "value"});
        for (std::size_t i = 0; i < out.result.params.size(); ++i) {
            w.cell(i).cell(out.result.params[i]);
            w.end_row();
        }
    }
    json m = manifest("train", c);
    m["data"] = d.to_json();
    m["model"] = mo.to_json();
    m["model_kind"] = to_string(out.model.kind());
    m["widths"] = out.model.widths();
    m["train"] = out.cfg;
    m["train_size"] = out.data.train.size();
    m["final"] = final_metrics(out.result.log);
    m["diverged"] = out.result.log.diverged;
    m["files"] = {"snapshots.csv", "trajectory.csv", "params.csv", "config.toml"};
    write_json(dir / "manifest.json", m);
    write_config_echo(dir / "config.toml", c, app);
    if (!c.quiet) {
        std::cout << m["final"].dump(2) << "\n";
        if (out.result.log.diverged) std::cout << "run diverged after " << out.result.log.steps_completed << " steps\n";
    }
    return 0;
}

std::vector<Segment> parse_segments(const std::string& text) {
    std::vector<Segment> segs;
    if (text.empty()) return segs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find(':');
        const auto b = item.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos) {
            throw std::invalid_argument("segment '" + item + "' is not name:offset:length");
        }
        segs.push_back({item.substr(0, a), std::stoul(item.substr(a + 1, b - a - 1)), std::stoul(item.substr(b + 1))});
    }
    return segs;
}

int cmd_coherence(const Common& c, const std::string& input, const std::string& segments, std::size_t batch,
                  std::size_t rounds) {
    const Mat64 g = read_matrix_csv(input);
    const auto report = alpha(g, parse_segments(segments));
    json j = report;
    if (g.rows() >= 2) {
        j["sign_stiffness"] = sign_stiffness(g).value;
        j["cos_stiffness"] = cos_stiffness(g).value;
    }
    if (report.alpha > 0.0) j["gradient_diversity"] = 1.0 / report.alpha;
    if (batch > 0) {
        const auto imp = imputed_alpha_from_rows(g, batch, rounds, c.seed);
        j["imputed"] = {{"k", batch}, {"rounds", rounds}, {"alpha", imp.alpha}, {"alpha_batch", imp.alpha_batch}, {"clamped", imp.clamped}};
    }
    if (!c.out.empty() || std::getenv("COHGRAD_OUT") != nullptr) {
        const fs::path dir = run_dir(c, "coherence");
        fs::create_directories(dir);
        json m = manifest("coherence", c);
        m["input"] = input;
        m["report"] = j;
        write_json(dir / "manifest.json", m);
    }
    if (!c.quiet) std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_bound(const Common& c, const std::string& run, std::optional<double> L, std::optional<double> beta) {
    const fs::path src(run);
    const json m = json::parse(read_text(src / "manifest.json"));
    if (m.value("schema_version", 0) != kSchemaVersion) {
        throw std::runtime_error("manifest schema_version mismatch in " + (src / "manifest.json").string());
    }
    if (m.at("command") != "train") throw std::runtime_error("bound needs a train run directory");
    const CsvTable t = read_csv(src / "trajectory.csv");
    BoundInputs in;
    in.m = m.at("train_size");
    bool strided = false;
    const auto ie = t.column("eta");
    const auto ia = t.column("alpha");
    const auto iff = t.column("filled");
    for (const auto& row : t.rows) {
        in.etas.push_back(parse_double(row[ie]));
        in.alphas.push_back(std::clamp(parse_double(row[ia]), 0.0, 1.0));
        strided = strided || row[iff] == "1";
    }
    std::optional<ConstantEstimate> est;
    if (!L || !beta) {
        // Replay the run (it is deterministic) keeping snapshot parameters.
        TrainConfig cfg = m.at("train").get<TrainConfig>();
        cfg.keep_params = true;
        auto out = run_training(DataOpts::from_json(m.at("data")), ModelOpts::from_json(m.at("model")), cfg,
                                m.at("seed").get<std::uint64_t>());
        std::vector<Vec64> traj;
        for (const auto& s : out.result.log.snapshots) traj.push_back(s.params);
        ConstantOptions opts;
        opts.seed = c.seed;
        est = estimate_constants(out.model, out.data, traj, opts);
    }
    in.L_lip = L ? *L : est->L_lip;
    in.beta = beta ? *beta : est->beta;
    json rep = bound_report(in, est ? &*est : nullptr, strided);
    const fs::path dir = run_dir(c, "bound");
    fs::create_directories(dir);
    json man = manifest("bound", c);
    man["run"] = run;
    man["report"] = rep;
    write_json(dir / "manifest.json", man);
    if (!c.quiet) {
        json brief = rep;
        brief.erase("terms");
        std::cout << brief.dump(2) << "\n";
    }
    return 0;
}

json parse_set(const std::vector<std::string>& sets) {
    json o = json::object();
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        const std::string val = s.substr(eq + 1);
        json v = json::parse(val, nullptr, false);
        o[key] = v.is_discarded() ? json(val) : v;
    }
    return o;
}

int cmd_repro(const Common& c, const std::string& which, const std::vector<std::string>& sets, bool seed_given) {
    std::vector<ExperimentId> ids;
    if (which == "all") {
        ids = all_experiments();
        if (!sets.empty()) throw std::invalid_argument("--set applies to a single experiment, not 'all'");
    } else {
        ids = {parse_experiment(which)};
    }
    json overrides = parse_set(sets);
    if (seed_given) overrides["seed"] = c.seed;
    const fs::path root = c.out.empty() ? run_dir(c, "repro") : fs::path(c.out);
    bool ok = true;
    for (ExperimentId id : ids) {
        const auto t0 = std::chrono::steady_clock::now();
        const Verdict v = run_experiment(id, overrides, root / to_string(id));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ok = ok && v.pass();
        if (!c.quiet) {
            std::cout << (v.pass() ? "[PASS] " : "[FAIL] ") << to_string(id) << " (" << v.checks.size() << " checks, "
                      << std::fixed << std::setprecision(1) << secs << " s)\n";
            std::cout.unsetf(std::ios::floatfield);
            for (const auto& ch : v.checks) {
                if (!ch.pass) {
                    std::cout << "    " << ch.name << ": observed " << format_double(ch.observed) << ", want "
                              << to_string(ch.relation) << " " << format_double(ch.expected);
                    if (ch.relation == Relation::approx) std::cout << " +- " << format_double(ch.tolerance);
                    std::cout << "\n";
                }
            }
        }
    }
    return ok ? 0 : 1;
}

int cmd_compare(const Common& c, const DataOpts& d, const ModelOpts& mo, TrainOpts& to,
                const std::vector<std::string>& aggs, const std::vector<double>& noise, const std::string& kind,
                CLI::App& app) {
    const fs::path dir = run_dir(c, "compare-aggregators");
    fs::create_directories(dir / "runs");
    const Dataset base = d.base(c.seed);
    CsvWriter grid(dir / "grid.csv", {"noise", "aggregator", "train_acc", "test_acc", "overfit", "train_loss",
                                      "test_loss", "gap", "pristine_acc", "corrupt_acc", "diverged"});
    for (double nz : noise) {
        const Dataset data = kind == "label" ? d.noisy(base, nz, 0.0, c.seed) : d.noisy(base, 0.0, nz, c.seed);
        const Model model = mo.build(data);
        for (const auto& a : aggs) {
            to.aggregator = a;
            TrainConfig cfg = to.build(c.seed);
            cfg.validate(data.train.size());
            const auto r = train(model, model.init_params(c.seed + kInitOffset), data, cfg);
            const auto& s = r.log.snapshots.back();
            std::string name = "noise" + format_double(nz) + "_" + a;
            std::replace(name.begin(), name.end(), ':', '_');
            write_snapshots_csv(dir / "runs" / (name + ".csv"), model, r.log, cfg);
            grid.cell(nz).cell(a).cell(s.train.accuracy).cell(s.test.accuracy).cell(s.train.accuracy - s.test.accuracy);
            grid.cell(s.train.loss).cell(s.test.loss).cell(s.test.loss - s.train.loss);
            grid.cell(s.tagged.pristine ? s.tagged.pristine->accuracy : std::nan(""));
            grid.cell(s.tagged.corrupt ? s.tagged.corrupt->accuracy : std::nan(""));
            grid.cell(r.log.diverged ? "1" : "0");
            grid.end_row();
            if (!c.quiet) {
                std::cout << "noise " << format_double(nz) << " " << a << ": train_acc " << format_double(s.train.accuracy)
                          << " test_acc " << format_double(s.test.accuracy) << (r.log.diverged ? " (diverged)" : "")
                          << "\n";
            }
        }
    }
    json m = manifest("compare-aggregators", c);
    m["data"] = d.to_json();
    m["model"] = mo.to_json();
    m["train"] = to.cfg;
    m["aggregators"] = aggs;
    m["noise"] = noise;
    m["noise_kind"] = kind;
    write_json(dir / "manifest.json", m);
    write_config_echo(dir / "config.toml", c, app);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient coherence laboratory"};
    app.require_subcommand(1);
    // Common flags are accepted before or after the subcommand name.
    app.fallthrough();
    app.set_config("--config", "", "TOML-style config file (sections per subcommand)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Common common;
    app.add_option("--seed", common.seed, "run seed")->capture_default_str();
    app.add_option("--out", common.out, "run directory (default $COHGRAD_OUT/<command> or runs/<command>)");
    app.add_flag("--quiet", common.quiet, "suppress stdout summaries");

    DataOpts data;
    ModelOpts model;
    TrainOpts topts;

    auto* gen = app.add_subcommand("gen-data", "generate a dataset as CSV");
    data.add(gen);

    auto* tr = app.add_subcommand("train", "train one model and log coherence");
    data.add(tr);
    model.add(tr);
    topts.add(tr);

    std::string input;
    std::string segments;
    std::size_t impute_k = 0;
    std::size_t impute_rounds = 1;
    auto* coh = app.add_subcommand("coherence", "alpha and related metrics of a gradient CSV");
    coh->add_option("--input", input, "headed CSV, one gradient per row")->required()->check(CLI::ExistingFile);
    coh->add_option("--segments", segments, "name:offset:length,...");
    coh->add_option("--impute-batch", impute_k, "also report alpha imputed from k-row batch means");
    coh->add_option("--impute-rounds", impute_rounds, "regroupings pooled (round 0 keeps file order)")
        ->check(CLI::PositiveNumber);

    std::string run;
    std::optional<double> L;
    std::optional<double> beta;
    auto* bd = app.add_subcommand("bound", "stability bound for a train run");
    bd->add_option("--run", run, "train run directory")->required()->check(CLI::ExistingDirectory);
    bd->add_option("--L", L, "Lipschitz constant (estimated when omitted)");
    bd->add_option("--beta", beta, "smoothness constant (estimated when omitted)");

    std::string which;
    std::vector<std::string> sets;
    auto* rp = app.add_subcommand("repro", "run a scripted reproduction");
    rp->add_option("experiment", which, "experiment id or 'all'")->required();
    rp->add_option("--set", sets, "override key=value (JSON values)");

    std::vector<std::string> aggs = {"mean", "winsorized:1", "winsorized:2", "winsorized:4", "winsorized:8"};
    std::vector<double> noise = {0.0};
    std::string noise_kind = "label";
    auto* cmp = app.add_subcommand("compare-aggregators", "grid of aggregators by noise level");
    data.add(cmp);
    model.add(cmp);
    topts.add(cmp);
    cmp->add_option("--aggregators", aggs, "aggregator specs")->delimiter(',')->capture_default_str();
    cmp->add_option("--noise", noise, "noise fractions")->delimiter(',')->capture_default_str();
    cmp->add_option("--noise-kind", noise_kind, "label or pixel")
        ->check(CLI::IsMember({"label", "pixel"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(common, data, *gen);
        if (tr->parsed()) return cmd_train(common, data, model, topts, *tr);
        if (coh->parsed()) return cmd_coherence(common, input, segments, impute_k, impute_rounds);
        if (bd->parsed()) return cmd_bound(common, run, L, beta);
        if (rp->parsed()) return cmd_repro(common, which, sets, app.count("--seed") > 0);
        if (cmp->parsed()) return cmd_compare(common, data, model, topts, aggs, noise, noise_kind, *cmp);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
