#pragma once

// Scripted desk-scale reproductions. Each experiment is a pure function of its
// JSON config (defaults plus type-checked overrides) and returns a verdict: a
// list of named checks plus the artifact files it wrote.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cohgrad {

enum class ExperimentId {
    ex1_linear_LM,
    ex1_median,
    ex5_wsgd_label_noise,
    ex5_wsgd_pixel_noise,
    m3_noise_grid,
    ex6_diag_deep,
    ex7_two_neurons,
    ex7_adversarial_heatmap,
    ex8_two_neurons_memorize,
    easyhard_pipeline,
    pristine_corrupt,
    evolution_1d,
    underparam_outliers,
};

const std::vector<ExperimentId>& all_experiments();
const char* to_string(ExperimentId id);
/// Throws std::invalid_argument listing the valid ids.
ExperimentId parse_experiment(std::string_view name);

enum class Relation { less, less_equal, greater, greater_equal, approx };
const char* to_string(Relation r);

struct Check {
    std::string name;
    double expected = 0.0;
    double observed = 0.0;
    /// Only used by Relation::approx: |observed - expected| <= tolerance.
    double tolerance = 0.0;
    Relation relation = Relation::approx;
    bool pass = false;
};

Check make_check(std::string name, double observed, Relation rel, double expected, double tolerance = 0.0);

struct Verdict {
    ExperimentId id{};
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<Check> checks;
    /// Measured quantities that are reported but not asserted.
    nlohmann::json reports = nlohmann::json::object();
    std::vector<std::filesystem::path> artifacts;

    bool pass() const;
};

nlohmann::json to_json(const Verdict& v);

/// Per-experiment defaults; every accepted override key appears here.
nlohmann::json default_config(ExperimentId id);

/// Overlays `overrides` on `defaults`. Unknown keys and type changes throw
/// std::invalid_argument (integers are accepted where floats are expected).
nlohmann::json apply_overrides(const nlohmann::json& defaults, const nlohmann::json& overrides);

/// Runs the experiment. With a non-empty `out_dir`, snapshot CSVs, grids and
/// verdict.json are written there.
Verdict run_experiment(ExperimentId id, const nlohmann::json& overrides = nlohmann::json::object(),
                       const std::filesystem::path& out_dir = {});

}  // namespace cohgrad
