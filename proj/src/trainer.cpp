#include "cohgrad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cohgrad/io.hpp"

namespace cohgrad {

void TrainConfig::validate(std::size_t train_size) const {
    if (train_size == 0) {
        throw std::invalid_argument("training set is empty");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw std::invalid_argument("lr must be positive and finite");
    }
    if (batch_size > train_size) {
        throw std::invalid_argument("batch_size " + std::to_string(batch_size) + " exceeds training set size " +
                                    std::to_string(train_size));
    }
    if (aggregator.kind == AggKind::m3 && (micro_batch == 0 || micro_batch > train_size)) {
        throw std::invalid_argument("micro_batch must lie in [1, training set size]");
    }
    if (!(snapshot_drop >= 0.0 && snapshot_drop < 1.0)) {
        throw std::invalid_argument("snapshot_drop must lie in [0, 1)");
    }
    if (impute_batch > 0 && impute_rounds == 0) {
        throw std::invalid_argument("impute_rounds must be at least 1");
    }
    try {
        aggregator.validate();
    } catch (const ContractViolation& e) {
        throw std::invalid_argument(e.what());
    }
}

double TrainConfig::eta(std::size_t t) const {
    if (schedule == Schedule::constant) {
        return lr;
    }
    return lr / static_cast<double>(std::max<std::size_t>(t, 1));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"steps", c.steps},
                       {"schedule", c.schedule == Schedule::constant ? "constant" : "linear_decay"},
                       {"lr", c.lr},
                       {"batch_size", c.batch_size},
                       {"micro_batch", c.micro_batch},
                       {"aggregator", c.aggregator.spec()},
                       {"seed", c.seed},
                       {"eval_train_m", c.eval_train_m},
                       {"eval_test_m", c.eval_test_m},
                       {"test_coherence", c.test_coherence},
                       {"snapshot_drop", c.snapshot_drop},
                       {"snapshot_every", c.snapshot_every},
                       {"trajectory_stride", c.trajectory_stride},
                       {"trace", c.trace},
                       {"impute_batch", c.impute_batch},
                       {"impute_rounds", c.impute_rounds},
                       {"tagged_metrics", c.tagged_metrics},
                       {"keep_params", c.keep_params}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    static const char* const known[] = {"steps",          "schedule",        "lr",
                                        "batch_size",     "micro_batch",     "aggregator",
                                        "seed",           "eval_train_m",    "eval_test_m",
                                        "test_coherence", "snapshot_drop",   "snapshot_every",
                                        "trajectory_stride", "trace",        "impute_batch",   "impute_rounds",
                                        "tagged_metrics", "keep_params"};
    for (const auto& item : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return item.key() == k; }) ==
            std::end(known)) {
            throw std::invalid_argument("unknown train config key: " + item.key());
        }
    }
    TrainConfig d;
    c.steps = j.value("steps", d.steps);
    const std::string sched = j.value("schedule", std::string("constant"));
    if (sched == "constant") {
        c.schedule = Schedule::constant;
    } else if (sched == "linear_decay") {
        c.schedule = Schedule::linear_decay;
    } else {
        throw std::invalid_argument("schedule must be constant or linear_decay, got " + sched);
    }
    c.lr = j.value("lr", d.lr);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.micro_batch = j.value("micro_batch", d.micro_batch);
    c.aggregator = parse_aggregator(j.value("aggregator", std::string("mean")));
    c.seed = j.value("seed", d.seed);
    c.eval_train_m = j.value("eval_train_m", d.eval_train_m);
    c.eval_test_m = j.value("eval_test_m", d.eval_test_m);
    c.test_coherence = j.value("test_coherence", d.test_coherence);
    c.snapshot_drop = j.value("snapshot_drop", d.snapshot_drop);
    c.snapshot_every = j.value("snapshot_every", d.snapshot_every);
    c.trajectory_stride = j.value("trajectory_stride", d.trajectory_stride);
    c.trace = j.value("trace", d.trace);
    c.impute_batch = j.value("impute_batch", d.impute_batch);
    c.impute_rounds = j.value("impute_rounds", d.impute_rounds);
    c.tagged_metrics = j.value("tagged_metrics", d.tagged_metrics);
    c.keep_params = j.value("keep_params", d.keep_params);
}

const char* to_string(Trigger t) {
    switch (t) {
        case Trigger::initial: return "initial";
        case Trigger::watermark: return "watermark";
        case Trigger::periodic: return "periodic";
        case Trigger::final: return "final";
    }
    return "?";
}

std::vector<std::size_t> eval_sample(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (m == 0 || m >= n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    Rng rng(seed);
    auto perm = rng.permutation(n);
    perm.resize(m);
    return perm;
}

ImputedAlpha imputed_alpha_from_rows(const Mat64& grads, std::size_t k, std::size_t rounds, std::uint64_t seed) {
    const std::size_t n = grads.rows();
    if (k == 0 || n < k || rounds == 0) {
        throw ContractViolation("imputed_alpha_from_rows: need at least one full batch and one round");
    }
    const std::size_t batches = n / k;
    CoherenceStats stats(grads.cols());
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Vec64 mean(grads.cols());
    for (std::size_t r = 0; r < rounds; ++r) {
        if (r > 0) rng.shuffle(order);
        for (std::size_t b = 0; b < batches; ++b) {
            std::fill(mean.begin(), mean.end(), 0.0);
            for (std::size_t i = b * k; i < (b + 1) * k; ++i) axpy(1.0, grads.row(order[i]), mean);
            for (double& v : mean) v /= static_cast<double>(k);
            stats.add(mean);
        }
    }
    if (n % k != 0 || n == k) return impute_alpha(stats, k);
    const double kd = static_cast<double>(k);
    return impute_alpha_effective(alpha(stats).alpha, kd * static_cast<double>(n - 1) / static_cast<double>(n - k));
}

namespace {

class BatchSampler {
public:
    BatchSampler(std::size_t n, bool shuffle, Rng rng) : n_(n), shuffle_(shuffle), rng_(rng), order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        pos_ = n_;
    }

    std::vector<std::size_t> next(std::size_t count) {
        if (pos_ >= n_) {
            if (shuffle_) {
                rng_.shuffle(order_);
            }
            pos_ = 0;
        }
        const std::size_t take = std::min(count, n_ - pos_);
        std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
        pos_ += take;
        seen_ += take;
        return out;
    }

    double epoch() const { return static_cast<double>(seen_) / static_cast<double>(n_); }

private:
    std::size_t n_;
    bool shuffle_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::size_t seen_ = 0;
};

/// Per-example gradients of the listed examples; returns the summed loss.
double grads_and_loss(const Model& model, std::span<const double> params, const std::vector<Example>& examples,
                      std::span<const std::size_t> idx, Mat64& out) {
    out.reshape(idx.size(), model.num_params());
    double loss = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        loss += model.loss_and_grad(params, examples[idx[i]], out.row(i));
    }
    return loss;
}

std::vector<Example> gather(const std::vector<Example>& all, std::span<const std::size_t> idx) {
    std::vector<Example> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(all[i]);
    return out;
}

}  // namespace

TaggedMetrics measure_tagged(const Model& model, std::span<const double> params, const Dataset& data,
                             std::size_t sample_cap, std::uint64_t seed) {
    std::vector<std::size_t> pristine;
    std::vector<std::size_t> corrupt;
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        if (data.train[i].tag == Tag::pristine) pristine.push_back(i);
        if (data.train[i].tag == Tag::corrupt) corrupt.push_back(i);
    }
    std::size_t n = 0;
    if (!pristine.empty() && !corrupt.empty()) {
        n = std::min(pristine.size(), corrupt.size());
    } else {
        n = std::max(pristine.size(), corrupt.size());
    }
    if (sample_cap > 0) {
        n = std::min(n, sample_cap);
    }
    Rng rng(seed);
    auto one = [&](std::vector<std::size_t>& members) -> std::optional<TagMetrics> {
        if (members.empty()) {
            return std::nullopt;
        }
        TagMetrics t;
        const EvalResult e = evaluate(model, params, gather(data.train, members));
        t.count = members.size();
        t.loss = e.loss;
        t.accuracy = e.accuracy;
        rng.shuffle(members);
        const std::span<const std::size_t> sample(members.data(), n);
        t.coherence = alpha(model.per_example_grads(params, data.train, sample), model.segments());
        return t;
    };
    TaggedMetrics out;
    out.pristine = one(pristine);
    out.corrupt = one(corrupt);
    return out;
}

TrainResult train(const Model& model, Vec64 params0, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate(data.train.size());
    if (params0.size() != model.num_params()) {
        throw ContractViolation("initial parameters have wrong length");
    }
    for (std::size_t i : cfg.trace) {
        if (i >= model.num_params()) {
            throw std::invalid_argument("trace index " + std::to_string(i) + " out of range");
        }
    }

    const std::size_t n = data.train.size();
    const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;
    const bool m3 = cfg.aggregator.kind == AggKind::m3;
    const std::size_t batch = full_batch ? n : cfg.batch_size;

    Rng root(cfg.seed);
    BatchSampler sampler(n, !(full_batch && !m3), root.fork(1));
    const auto train_eval = eval_sample(n, cfg.eval_train_m, root.next_u64());
    const auto test_eval = eval_sample(data.test.size(), cfg.eval_test_m, root.next_u64());
    const std::uint64_t tag_seed = root.next_u64();
    const std::uint64_t impute_seed = root.next_u64();
    bool tagged = false;
    for (const auto& ex : data.train) {
        tagged = tagged || ex.tag != Tag::none;
    }
    tagged = tagged && cfg.tagged_metrics;

    TrainResult result;
    RunLog& log = result.log;
    log.train_size = n;
    Vec64& w = result.params;
    w = std::move(params0);

    auto measure = [&](std::size_t step, Trigger trigger, double batch_loss) {
        Snapshot s;
        s.step = step;
        s.epoch = sampler.epoch();
        s.trigger = trigger;
        s.batch_loss = batch_loss;
        s.train = evaluate(model, w, data.train);
        s.test = evaluate(model, w, data.test);
        if (data.test.empty()) {
            s.test.loss = std::numeric_limits<double>::quiet_NaN();
            s.test.accuracy = std::numeric_limits<double>::quiet_NaN();
        }
        const Mat64 g = model.per_example_grads(w, data.train, train_eval);
        s.coh_train = alpha(g, model.segments());
        if (cfg.test_coherence && !test_eval.empty()) {
            s.coh_test = alpha(model.per_example_grads(w, data.test, test_eval), model.segments());
        }
        if (tagged) {
            s.tagged = measure_tagged(model, w, data, cfg.eval_train_m, tag_seed);
        }
        if (cfg.impute_batch > 0 && g.rows() >= cfg.impute_batch) {
            Rng r(impute_seed ^ (0x9e3779b97f4a7c15ULL * (step + 1)));
            const auto perm = r.permutation(g.rows());
            Mat64 shuffled(g.rows(), g.cols());
            for (std::size_t i = 0; i < perm.size(); ++i) {
                std::copy(g.row(perm[i]).begin(), g.row(perm[i]).end(), shuffled.row(i).begin());
            }
            s.imputed = imputed_alpha_from_rows(shuffled, cfg.impute_batch, cfg.impute_rounds, r.next_u64());
        }
        for (std::size_t i : cfg.trace) {
            s.trace.push_back(w[i]);
        }
        if (cfg.keep_params) {
            s.params = w;
        }
        log.snapshots.push_back(std::move(s));
    };

    double watermark = std::numeric_limits<double>::infinity();
    double traj_alpha = 0.0;
    M3Stream stream;
    Mat64 g;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        if (cfg.trajectory_stride > 0) {
            TrajectoryPoint p;
            p.step = t + 1;
            p.eta = cfg.eta(t + 1);
            if (t % cfg.trajectory_stride == 0) {
                traj_alpha = alpha(model.per_example_grads(w, data.train, train_eval)).alpha;
            } else {
                p.filled = true;
            }
            p.alpha = traj_alpha;
            log.trajectory.push_back(p);
        }

        Vec64 update;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        if (m3) {
            for (int r = 0; r < 3; ++r) {
                const auto idx = sampler.next(cfg.micro_batch);
                loss_sum += grads_and_loss(model, w, data.train, idx, g);
                loss_count += idx.size();
                if (auto out = stream.push(column_means(g))) {
                    update = std::move(*out);
                }
            }
        } else {
            const auto idx = sampler.next(batch);
            loss_sum = grads_and_loss(model, w, data.train, idx, g);
            loss_count = idx.size();
            update = aggregate(cfg.aggregator, g);
        }
        const double batch_loss = loss_sum / static_cast<double>(loss_count);

        if (!std::isfinite(batch_loss)) {
            log.diverged = true;
            break;
        }
        if (t == 0) {
            measure(0, Trigger::initial, batch_loss);
            watermark = batch_loss;
        } else if (batch_loss <= (1.0 - cfg.snapshot_drop) * watermark) {
            measure(t, Trigger::watermark, batch_loss);
            watermark = batch_loss;
        } else if (cfg.snapshot_every > 0 && t % cfg.snapshot_every == 0) {
            measure(t, Trigger::periodic, batch_loss);
        }

        axpy(-cfg.eta(t + 1), update, w);
        log.steps_completed = t + 1;
        if (!all_finite(w)) {
            log.diverged = true;
            break;
        }
    }
    if (log.snapshots.empty() || log.snapshots.back().step != log.steps_completed) {
        measure(log.steps_completed, Trigger::final, std::numeric_limits<double>::quiet_NaN());
    }
    return result;
}

std::vector<std::string> snapshot_columns(const Model& model, const RunLog& log, const TrainConfig& cfg) {
    std::vector<std::string> cols = {"step",     "epoch",       "train_loss",     "test_loss",
                                     "train_acc", "test_acc",   "alpha_train",    "alpha_hat_train"};
    const bool has_test = std::any_of(log.snapshots.begin(), log.snapshots.end(),
                                      [](const Snapshot& s) { return s.coh_test.has_value(); });
    if (has_test) {
        cols.push_back("alpha_test");
        cols.push_back("alpha_hat_test");
    }
    for (const auto& seg : model.segments()) {
        cols.push_back("alpha_hat_" + seg.name);
    }
    const bool has_p = std::any_of(log.snapshots.begin(), log.snapshots.end(),
                                   [](const Snapshot& s) { return s.tagged.pristine.has_value(); });
    const bool has_c = std::any_of(log.snapshots.begin(), log.snapshots.end(),
                                   [](const Snapshot& s) { return s.tagged.corrupt.has_value(); });
    for (const auto& [present, tag] : {std::pair{has_p, "pristine"}, std::pair{has_c, "corrupt"}}) {
        if (present) {
            cols.push_back(std::string(tag) + "_loss");
            cols.push_back(std::string(tag) + "_acc");
            cols.push_back(std::string(tag) + "_alpha_hat");
        }
    }
    cols.push_back("trigger");
    cols.push_back("batch_loss");
    if (cfg.impute_batch > 0) {
        cols.push_back("alpha_imputed_train");
    }
    for (std::size_t i : cfg.trace) {
        cols.push_back("param_" + std::to_string(i));
    }
    return cols;
}

void write_snapshots_csv(const std::filesystem::path& path, const Model& model, const RunLog& log,
                         const TrainConfig& cfg) {
    const auto cols = snapshot_columns(model, log, cfg);
    const bool has_test = std::find(cols.begin(), cols.end(), "alpha_test") != cols.end();
    const bool has_p = std::find(cols.begin(), cols.end(), "pristine_loss") != cols.end();
    const bool has_c = std::find(cols.begin(), cols.end(), "corrupt_loss") != cols.end();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    CsvWriter out(path, cols);
    for (const auto& s : log.snapshots) {
        out.cell(s.step).cell(s.epoch);
        out.cell(s.train.loss).cell(s.test.loss).cell(s.train.accuracy).cell(s.test.accuracy);
        out.cell(s.coh_train.alpha).cell(s.coh_train.alpha_hat);
        if (has_test) {
            out.cell(s.coh_test ? s.coh_test->alpha : nan).cell(s.coh_test ? s.coh_test->alpha_hat : nan);
        }
        for (const auto& seg : s.coh_train.per_segment) {
            out.cell(seg.alpha_hat);
        }
        for (const auto& [present, tm] : {std::pair{has_p, &s.tagged.pristine}, std::pair{has_c, &s.tagged.corrupt}}) {
            if (!present) continue;
            if (*tm) {
                out.cell((*tm)->loss).cell((*tm)->accuracy).cell((*tm)->coherence.alpha_hat);
            } else {
                out.cell(nan).cell(nan).cell(nan);
            }
        }
        out.cell(std::string_view(to_string(s.trigger))).cell(s.batch_loss);
        if (cfg.impute_batch > 0) {
            out.cell(s.imputed ? s.imputed->alpha : nan);
        }
        for (double v : s.trace) {
            out.cell(v);
        }
        out.end_row();
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const RunLog& log) {
    CsvWriter out(path, {"step", "eta", "alpha", "filled"});
    for (const auto& p : log.trajectory) {
        out.cell(p.step).cell(p.eta).cell(p.alpha).cell(std::size_t{p.filled ? 1u : 0u});
        out.end_row();
    }
}

nlohmann::json final_metrics(const RunLog& log) {
    nlohmann::json j;
    j["diverged"] = log.diverged;
    j["steps_completed"] = log.steps_completed;
    if (log.snapshots.empty()) {
        return j;
    }
    const Snapshot& s = log.snapshots.back();
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); };
    j["step"] = s.step;
    j["train_loss"] = num(s.train.loss);
    j["test_loss"] = num(s.test.loss);
    j["train_acc"] = num(s.train.accuracy);
    j["test_acc"] = num(s.test.accuracy);
    j["gap"] = num(s.test.loss - s.train.loss);
    j["coherence_train"] = s.coh_train;
    if (s.coh_test) {
        j["coherence_test"] = *s.coh_test;
    }
    return j;
}

}  // namespace cohgrad
