#pragma once

// Desk-scale dataset generators: the two toy tables (L "real" and M "random"),
// Gaussian class clusters as a stand-in for image classification, label and
// input noise injection, and the 1-D regression-with-outliers set.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cohgrad/numkit.hpp"

namespace cohgrad {

enum class Tag { none, pristine, corrupt };

const char* to_string(Tag tag);

struct Example {
    Vec64 x;
    /// Length 1 for regression; one-hot of length C for classification.
    Vec64 y;
    Tag tag = Tag::none;
};

struct DatasetMeta {
    std::string generator;
    std::uint64_t seed = 0;
    double label_noise = 0.0;
    double pixel_noise = 0.0;
    /// 0 for regression targets.
    std::size_t num_classes = 0;
};

struct Dataset {
    std::vector<Example> train;
    std::vector<Example> test;
    DatasetMeta meta;

    bool is_classification() const { return meta.num_classes > 0; }
    std::size_t input_dim() const;
    std::size_t target_dim() const;
};

/// Index of the largest entry (first on ties).
std::size_t argmax(std::span<const double> v);
Vec64 one_hot(std::size_t label, std::size_t classes);

/// The "real" toy table: idiosyncratic features 1-5 plus a common sixth feature
/// that predicts every label. Four training rows, one held-out row.
Dataset dataset_L();

/// The "random" toy table: same idiosyncratic features, sixth feature zero.
Dataset dataset_M();

/// Gaussian class clusters. Class c has mean `kClusterSeparation * e_c` (the
/// c-th standard basis vector, hence the dims >= classes requirement) and
/// isotropic noise of standard deviation `spread`. Labels are drawn uniformly.
/// Train and test are drawn from independent forks of the seed.
Dataset make_clusters(std::size_t n_train, std::size_t n_test, std::size_t dims,
                      std::size_t classes, double spread, std::uint64_t seed);

inline constexpr double kClusterSeparation = 2.0;

struct SparseClusterSpec {
    std::size_t n_train = 500;
    std::size_t n_test = 500;
    std::size_t classes = 10;
    /// Binary features owned by each class (disjoint blocks).
    std::size_t class_features = 10;
    /// Probability that each of an example's class features is on.
    double active_prob = 0.5;
    /// Size of the shared pool of idiosyncratic features.
    std::size_t pool = 1000;
    /// Pool features switched on per example, drawn without replacement.
    std::size_t idiosyncratic = 5;
    /// When > 0, classes are instead random binary prototypes over this many
    /// shared features (each on with probability 1/2), and every example
    /// flips each prototype bit with probability `flip_prob`.
    /// class_features and active_prob are then unused.
    std::size_t prototype_features = 0;
    double flip_prob = 0.1;
};

/// Sparse binary analogue of the toy tables at scale: each example carries a
/// random subset of its class's features (the common part) plus a few
/// features from a large shared pool (the idiosyncratic part). Input
/// dimension is classes * class_features + pool. Labels uniform.
Dataset make_sparse_clusters(const SparseClusterSpec& spec, std::uint64_t seed);

/// Picks floor(fraction * |train|) training examples uniformly without
/// replacement and resamples each label uniformly over all classes (so a
/// corrupted example keeps its label with probability 1/C). Chosen examples
/// are tagged corrupt, the rest pristine. Test split untouched.
Dataset with_label_noise(const Dataset& d, double fraction, std::uint64_t seed);

/// Same selection rule, but replaces the chosen inputs with i.i.d. standard
/// normal vectors of the same dimension. Labels are kept.
Dataset with_pixel_noise(const Dataset& d, double fraction, std::uint64_t seed);

/// Binary counterpart for sparse inputs: each chosen input is replaced by a
/// 0/1 vector with the same number of nonzeros at uniformly drawn positions.
Dataset with_sparse_noise(const Dataset& d, double fraction, std::uint64_t seed);

/// m points with x ~ U[-2, 2] and y = 2x + 3 + N(0, sigma^2). Inputs are stored
/// as (x, 1) so that a bias-free linear model fits slope and intercept.
/// `n_outliers` points among those with x >= 1 get y = -1 and the corrupt tag.
/// The test split holds m clean points from an independent stream.
Dataset outlier_regression(std::size_t m, double sigma, std::size_t n_outliers, std::uint64_t seed);

/// Subset of a dataset's training examples (test untouched).
Dataset select_train(const Dataset& d, const std::vector<std::size_t>& indices);

/// Writes <prefix>_features.csv (x0..x{d-1}) and <prefix>_labels.csv
/// (y0..y{k-1},tag) for one split.
void write_split_csv(const std::vector<Example>& split, const std::filesystem::path& dir,
                     const std::string& prefix);

/// Writes train_* and test_* CSV pairs plus nothing else.
void write_dataset_csv(const Dataset& d, const std::filesystem::path& dir);

}  // namespace cohgrad
