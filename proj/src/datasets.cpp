#include "cohgrad/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cohgrad/io.hpp"

namespace cohgrad {

const char* to_string(Tag tag) {
    switch (tag) {
        case Tag::pristine: return "pristine";
        case Tag::corrupt: return "corrupt";
        case Tag::none: break;
    }
    return "none";
}

std::size_t Dataset::input_dim() const {
    if (!train.empty()) return train.front().x.size();
    if (!test.empty()) return test.front().x.size();
    return 0;
}

std::size_t Dataset::target_dim() const {
    if (!train.empty()) return train.front().y.size();
    if (!test.empty()) return test.front().y.size();
    return meta.num_classes > 0 ? meta.num_classes : 1;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

Vec64 one_hot(std::size_t label, std::size_t classes) {
    Vec64 y(classes, 0.0);
    y.at(label) = 1.0;
    return y;
}

namespace {

Example row(std::initializer_list<double> x, double y) { return Example{Vec64(x), Vec64{y}, Tag::none}; }

}  // namespace

Dataset dataset_L() {
    Dataset d;
    d.train = {
        row({1, 0, 0, 0, 0, 1}, 1),
        row({0, -1, 0, 0, 0, -1}, -1),
        row({0, 0, -1, 0, 0, -1}, -1),
        row({0, 0, 0, 1, 0, 1}, 1),
    };
    d.test = {row({0, 0, 0, 0, -1, -1}, -1)};
    d.meta.generator = "dataset_L";
    return d;
}

Dataset dataset_M() {
    Dataset d;
    d.train = {
        row({1, 0, 0, 0, 0, 0}, 1),
        row({0, -1, 0, 0, 0, 0}, -1),
        row({0, 0, -1, 0, 0, 0}, -1),
        row({0, 0, 0, 1, 0, 0}, 1),
    };
    d.test = {row({0, 0, 0, 0, -1, 0}, -1)};
    d.meta.generator = "dataset_M";
    return d;
}

namespace {

std::vector<Example> draw_clusters(std::size_t n, std::size_t dims, std::size_t classes, double spread, Rng& rng) {
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = static_cast<std::size_t>(rng.below(classes));
        Vec64 x(dims);
        for (std::size_t j = 0; j < dims; ++j) {
            x[j] = spread * rng.gaussian();
        }
        x[label] += kClusterSeparation;
        out.push_back(Example{std::move(x), one_hot(label, classes), Tag::none});
    }
    return out;
}

std::size_t noisy_count(double fraction, std::size_t n) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("noise fraction must lie in [0, 1]");
    }
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
}

}  // namespace

Dataset make_clusters(std::size_t n_train, std::size_t n_test, std::size_t dims, std::size_t classes, double spread,
                      std::uint64_t seed) {
    if (classes < 2) {
        throw std::invalid_argument("make_clusters: need at least 2 classes");
    }
    if (dims < classes) {
        throw std::invalid_argument("make_clusters: dims must be >= classes");
    }
    if (!(spread >= 0.0) || !std::isfinite(spread)) {
        throw std::invalid_argument("make_clusters: spread must be finite and non-negative");
    }
    Rng root(seed);
    Rng train_rng = root.fork(1);
    Rng test_rng = root.fork(2);
    Dataset d;
    d.train = draw_clusters(n_train, dims, classes, spread, train_rng);
    d.test = draw_clusters(n_test, dims, classes, spread, test_rng);
    d.meta.generator = "clusters";
    d.meta.seed = seed;
    d.meta.num_classes = classes;
    return d;
}

Dataset make_sparse_clusters(const SparseClusterSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2 || (spec.class_features == 0 && spec.prototype_features == 0)) {
        throw std::invalid_argument("make_sparse_clusters: need >= 2 classes and >= 1 feature per class");
    }
    if (spec.idiosyncratic > spec.pool) {
        throw std::invalid_argument("make_sparse_clusters: idiosyncratic count exceeds pool size");
    }
    if (!(spec.active_prob > 0.0 && spec.active_prob <= 1.0)) {
        throw std::invalid_argument("make_sparse_clusters: active_prob must lie in (0, 1]");
    }
    if (!(spec.flip_prob >= 0.0 && spec.flip_prob <= 0.5)) {
        throw std::invalid_argument("make_sparse_clusters: flip_prob must lie in [0, 0.5]");
    }
    const bool prototypes = spec.prototype_features > 0;
    const std::size_t common = prototypes ? spec.prototype_features : spec.classes * spec.class_features;
    const std::size_t dims = common + spec.pool;
    std::vector<std::vector<char>> proto(spec.classes);
    if (prototypes) {
        Rng proto_rng = Rng(seed).fork(3);
        for (auto& p : proto) {
            p.resize(common);
            for (char& b : p) b = proto_rng.uniform() < 0.5 ? 1 : 0;
        }
    }
    auto draw = [&](std::size_t n, Rng& rng) {
        std::vector<Example> out;
        out.reserve(n);
        std::vector<std::size_t> pool(spec.pool);
        for (std::size_t i = 0; i < n; ++i) {
            const auto label = static_cast<std::size_t>(rng.below(spec.classes));
            Vec64 x(dims, 0.0);
            if (prototypes) {
                for (std::size_t f = 0; f < common; ++f) {
                    const bool flip = rng.uniform() < spec.flip_prob;
                    x[f] = (proto[label][f] != 0) != flip ? 1.0 : 0.0;
                }
            } else {
                for (std::size_t f = 0; f < spec.class_features; ++f) {
                    if (rng.uniform() < spec.active_prob) {
                        x[label * spec.class_features + f] = 1.0;
                    }
                }
            }
            // Partial Fisher-Yates: the first k slots become a uniform k-subset.
            for (std::size_t j = 0; j < spec.pool; ++j) pool[j] = j;
            for (std::size_t j = 0; j < spec.idiosyncratic; ++j) {
                const auto pick = j + static_cast<std::size_t>(rng.below(spec.pool - j));
                std::swap(pool[j], pool[pick]);
                x[common + pool[j]] = 1.0;
            }
            out.push_back(Example{std::move(x), one_hot(label, spec.classes), Tag::none});
        }
        return out;
    };
    Rng root(seed);
    Rng train_rng = root.fork(1);
    Rng test_rng = root.fork(2);
    Dataset d;
    d.train = draw(spec.n_train, train_rng);
    d.test = draw(spec.n_test, test_rng);
    d.meta.generator = "sparse_clusters";
    d.meta.seed = seed;
    d.meta.num_classes = spec.classes;
    return d;
}

Dataset with_label_noise(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!d.is_classification()) {
        throw std::invalid_argument("with_label_noise: requires a classification dataset");
    }
    Dataset out = d;
    const std::size_t k = noisy_count(fraction, out.train.size());
    Rng rng(seed);
    const auto perm = rng.permutation(out.train.size());
    for (auto& ex : out.train) {
        ex.tag = Tag::pristine;
    }
    for (std::size_t i = 0; i < k; ++i) {
        Example& ex = out.train[perm[i]];
        ex.y = one_hot(static_cast<std::size_t>(rng.below(out.meta.num_classes)), out.meta.num_classes);
        ex.tag = Tag::corrupt;
    }
    out.meta.label_noise = fraction;
    return out;
}

Dataset with_pixel_noise(const Dataset& d, double fraction, std::uint64_t seed) {
    Dataset out = d;
    const std::size_t k = noisy_count(fraction, out.train.size());
    Rng rng(seed);
    const auto perm = rng.permutation(out.train.size());
    for (auto& ex : out.train) {
        ex.tag = Tag::pristine;
    }
    for (std::size_t i = 0; i < k; ++i) {
        Example& ex = out.train[perm[i]];
        for (double& v : ex.x) {
            v = rng.gaussian();
        }
        ex.tag = Tag::corrupt;
    }
    out.meta.pixel_noise = fraction;
    return out;
}

Dataset with_sparse_noise(const Dataset& d, double fraction, std::uint64_t seed) {
    Dataset out = d;
    const std::size_t k = noisy_count(fraction, out.train.size());
    Rng rng(seed);
    const auto perm = rng.permutation(out.train.size());
    for (auto& ex : out.train) {
        ex.tag = Tag::pristine;
    }
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < k; ++i) {
        Example& ex = out.train[perm[i]];
        const auto nnz = static_cast<std::size_t>(std::count_if(ex.x.begin(), ex.x.end(), [](double v) { return v != 0.0; }));
        const std::size_t dim = ex.x.size();
        slots.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) slots[j] = j;
        std::fill(ex.x.begin(), ex.x.end(), 0.0);
        for (std::size_t j = 0; j < nnz; ++j) {
            const auto pick = j + static_cast<std::size_t>(rng.below(dim - j));
            std::swap(slots[j], slots[pick]);
            ex.x[slots[j]] = 1.0;
        }
        ex.tag = Tag::corrupt;
    }
    out.meta.pixel_noise = fraction;
    return out;
}

Dataset outlier_regression(std::size_t m, double sigma, std::size_t n_outliers, std::uint64_t seed) {
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("outlier_regression: sigma must be non-negative");
    }
    Rng root(seed);
    Rng train_rng = root.fork(1);
    Rng test_rng = root.fork(2);
    Rng pick_rng = root.fork(3);

    auto draw = [sigma](std::size_t n, Rng& rng) {
        std::vector<Example> pts;
        pts.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rng.uniform(-2.0, 2.0);
            const double y = 2.0 * x + 3.0 + sigma * rng.gaussian();
            pts.push_back(Example{Vec64{x, 1.0}, Vec64{y}, Tag::none});
        }
        return pts;
    };

    Dataset d;
    d.train = draw(m, train_rng);
    d.test = draw(m, test_rng);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        d.train[i].tag = Tag::pristine;
        if (d.train[i].x[0] >= 1.0) {
            candidates.push_back(i);
        }
    }
    if (candidates.size() < n_outliers) {
        throw std::runtime_error("outlier_regression: only " + std::to_string(candidates.size()) +
                                 " points with x >= 1, need " + std::to_string(n_outliers));
    }
    pick_rng.shuffle(candidates);
    for (std::size_t i = 0; i < n_outliers; ++i) {
        Example& ex = d.train[candidates[i]];
        ex.y[0] = -1.0;
        ex.tag = Tag::corrupt;
    }
    d.meta.generator = "outlier_regression";
    d.meta.seed = seed;
    return d;
}

Dataset select_train(const Dataset& d, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.test = d.test;
    out.meta = d.meta;
    out.train.reserve(indices.size());
    for (std::size_t i : indices) {
        out.train.push_back(d.train.at(i));
    }
    return out;
}

void write_split_csv(const std::vector<Example>& split, const std::filesystem::path& dir, const std::string& prefix) {
    const std::size_t dx = split.empty() ? 0 : split.front().x.size();
    const std::size_t dy = split.empty() ? 0 : split.front().y.size();
    std::vector<std::string> fx;
    for (std::size_t j = 0; j < dx; ++j) fx.push_back("x" + std::to_string(j));
    std::vector<std::string> fy;
    for (std::size_t j = 0; j < dy; ++j) fy.push_back("y" + std::to_string(j));
    fy.push_back("tag");

    CsvWriter features(dir / (prefix + "_features.csv"), fx);
    CsvWriter labels(dir / (prefix + "_labels.csv"), fy);
    for (const auto& ex : split) {
        for (double v : ex.x) features.cell(v);
        features.end_row();
        for (double v : ex.y) labels.cell(v);
        labels.cell(std::string_view(to_string(ex.tag)));
        labels.end_row();
    }
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_split_csv(d.train, dir, "train");
    write_split_csv(d.test, dir, "test");
}

}  // namespace cohgrad
