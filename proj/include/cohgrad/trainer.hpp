#pragma once

// Deterministic (S)GD with a pluggable aggregator and coherence
// instrumentation.
//
// Step t (0-based) draws a batch, evaluates per-example gradients at w_t,
// combines them and moves to w_{t+1} with step size eta_{t+1}. Snapshots are
// taken at step 0, whenever the batch loss drops to (1 - snapshot_drop) times
// the loss at the previous snapshot, optionally every `snapshot_every` steps,
// and once more after the last step.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cohgrad/aggregators.hpp"
#include "cohgrad/coherence.hpp"
#include "cohgrad/datasets.hpp"
#include "cohgrad/models.hpp"

namespace cohgrad {

enum class Schedule { constant, linear_decay };

struct TrainConfig {
    std::size_t steps = 100;
    Schedule schedule = Schedule::constant;
    /// eta for constant; eta_t = lr / t (t >= 1) for linear_decay.
    double lr = 0.1;
    /// 0 means full batch.
    std::size_t batch_size = 0;
    /// m3 only: each update consumes three micro-batches of this size.
    std::size_t micro_batch = 1;
    Aggregator aggregator;
    std::uint64_t seed = 0;
    /// Size of the designated coherence samples (0 = whole split).
    std::size_t eval_train_m = 0;
    std::size_t eval_test_m = 0;
    bool test_coherence = true;
    double snapshot_drop = 0.01;
    /// Extra unconditional snapshots (0 = off).
    std::size_t snapshot_every = 0;
    /// Trajectory alpha is measured every `trajectory_stride` steps and held
    /// constant in between (0 disables the trajectory).
    std::size_t trajectory_stride = 1;
    /// Parameter indices copied into every snapshot.
    std::vector<std::size_t> trace;
    /// When > 0, snapshots also carry alpha imputed from means of mini-batches
    /// of this size drawn without replacement from the training eval sample.
    std::size_t impute_batch = 0;
    /// Reshuffles pooled per imputation.
    std::size_t impute_rounds = 8;
    /// Per-tag (pristine/corrupt) metrics when the training split is tagged.
    bool tagged_metrics = true;
    /// Keep a full parameter copy in each snapshot.
    bool keep_params = false;

    /// Throws std::invalid_argument describing the first bad field.
    void validate(std::size_t train_size) const;
    double eta(std::size_t t) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

enum class Trigger { initial, watermark, periodic, final };
const char* to_string(Trigger t);

struct TagMetrics {
    std::size_t count = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    CoherenceReport coherence;
};

struct TaggedMetrics {
    std::optional<TagMetrics> pristine;
    std::optional<TagMetrics> corrupt;
};

struct Snapshot {
    std::size_t step = 0;
    double epoch = 0.0;
    Trigger trigger = Trigger::initial;
    /// Loss of the batch drawn at this step (nan for the final snapshot).
    double batch_loss = 0.0;
    EvalResult train;
    EvalResult test;
    CoherenceReport coh_train;
    std::optional<CoherenceReport> coh_test;
    TaggedMetrics tagged;
    std::optional<ImputedAlpha> imputed;
    Vec64 trace;
    Vec64 params;
};

struct TrajectoryPoint {
    /// 1-based step index t of the bound's sum.
    std::size_t step = 0;
    double eta = 0.0;
    /// alpha(w_{t-1}) on the training eval sample.
    double alpha = 0.0;
    /// True when carried over from an earlier measurement (stride > 1).
    bool filled = false;
};

struct RunLog {
    std::vector<Snapshot> snapshots;
    std::vector<TrajectoryPoint> trajectory;
    bool diverged = false;
    std::size_t steps_completed = 0;
    std::size_t train_size = 0;
};

struct TrainResult {
    Vec64 params;
    RunLog log;
};

TrainResult train(const Model& model, Vec64 params0, const Dataset& data, const TrainConfig& cfg);

/// Loss and accuracy over every pristine / corrupt training example, and
/// coherence over equal-size samples of each (capped at `sample_cap` when
/// nonzero). Empty subsets stay absent.
TaggedMetrics measure_tagged(const Model& model, std::span<const double> params, const Dataset& data,
                             std::size_t sample_cap, std::uint64_t seed);

/// The designated coherence sample: the first `m` entries of a seeded
/// permutation of [0, n), or all of [0, n) in order when m is 0 or >= n.
std::vector<std::size_t> eval_sample(std::size_t n, std::size_t m, std::uint64_t seed);

/// Alpha imputed from means of k-sized mini-batches that partition the rows.
/// Round 0 groups the rows in their given order; each further round regroups a
/// seeded shuffle, and the batch means of all rounds are pooled. A short tail
/// group is dropped. Batches drawn without replacement from N rows have
/// variance shrunk by (N - k) / (N - 1), so the inverse uses the effective size
/// k (N - 1) / (N - k) when the rows divide evenly.
ImputedAlpha imputed_alpha_from_rows(const Mat64& grads, std::size_t k, std::size_t rounds = 1,
                                     std::uint64_t seed = 0);

/// Column names for the snapshot CSV of this run, in file order.
std::vector<std::string> snapshot_columns(const Model& model, const RunLog& log, const TrainConfig& cfg);
void write_snapshots_csv(const std::filesystem::path& path, const Model& model, const RunLog& log,
                         const TrainConfig& cfg);
void write_trajectory_csv(const std::filesystem::path& path, const RunLog& log);

inline constexpr int kSchemaVersion = 1;

/// Final-snapshot summary used in manifests and verdicts.
nlohmann::json final_metrics(const RunLog& log);

}  // namespace cohgrad
