#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uqnet/arch.hpp"
#include "uqnet/math.hpp"
#include "uqnet/prediction.hpp"
#include "uqnet/rng.hpp"

namespace uqnet {

/// Loader and split failures carry a typed error with enough context to name
/// the offending file/row.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Label value marking out-of-distribution examples: always counted incorrect
/// by the confidence-accuracy protocol.
inline constexpr int kUnknownClassLabel = -1;

struct Dataset {
    Matrix features;  // N x D
    TaskKind task{TaskKind::Regression};
    std::vector<double> targets_real;  // regression targets
    std::vector<int> targets_class;    // class indices, or kUnknownClassLabel
    int num_classes{0};
    std::vector<double> feature_min, feature_max;  // per-dimension, over this split
    std::string provenance;

    int size() const { return features.rows; }
    int dim() const { return features.cols; }

    void validate() const {
        if (size() < 1) throw DataError("dataset is empty");
        for (double v : features.data)
            if (!std::isfinite(v)) throw DataError("dataset contains non-finite feature");
        if (task == TaskKind::Regression) {
            if (static_cast<int>(targets_real.size()) != size())
                throw DataError("dataset target count mismatch");
            for (double v : targets_real)
                if (!std::isfinite(v)) throw DataError("dataset contains non-finite target");
        } else {
            if (static_cast<int>(targets_class.size()) != size())
                throw DataError("dataset target count mismatch");
            for (int c : targets_class)
                if (c != kUnknownClassLabel && (c < 0 || c >= num_classes))
                    throw DataError("dataset class index out of range");
        }
        for (int d = 0; d < dim(); ++d)
            if (feature_min[d] > feature_max[d]) throw DataError("dataset min > max");
    }
};

/// Recompute per-dimension feature ranges from the rows actually present.
inline void recompute_ranges(Dataset& ds) {
    const int n = ds.size(), d = ds.dim();
    ds.feature_min.assign(d, 0.0);
    ds.feature_max.assign(d, 0.0);
    for (int j = 0; j < d; ++j) {
        double lo = ds.features(0, j), hi = ds.features(0, j);
        for (int i = 1; i < n; ++i) {
            lo = std::min(lo, ds.features(i, j));
            hi = std::max(hi, ds.features(i, j));
        }
        ds.feature_min[j] = lo;
        ds.feature_max[j] = hi;
    }
}

/// Row subset (duplicates allowed, e.g. bootstrap multisets). Ranges are
/// recomputed so a train subset carries train-only statistics.
inline Dataset subset(const Dataset& ds, std::span<const int> indices) {
    if (indices.empty()) throw DataError("subset: empty index set");
    Dataset out;
    out.task = ds.task;
    out.num_classes = ds.num_classes;
    out.provenance = ds.provenance;
    out.features = Matrix(static_cast<int>(indices.size()), ds.dim());
    for (size_t r = 0; r < indices.size(); ++r) {
        const int i = indices[r];
        if (i < 0 || i >= ds.size()) throw DataError("subset: index out of range");
        for (int j = 0; j < ds.dim(); ++j) out.features(static_cast<int>(r), j) = ds.features(i, j);
        if (ds.task == TaskKind::Regression)
            out.targets_real.push_back(ds.targets_real[i]);
        else
            out.targets_class.push_back(ds.targets_class[i]);
    }
    recompute_ranges(out);
    return out;
}

struct FoldSpec {
    int n_folds{20};
    double test_fraction{0.1};
    uint64_t seed{0};

    void validate() const {
        if (n_folds < 1) throw std::invalid_argument("FoldSpec: n_folds must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw std::invalid_argument("FoldSpec: test_fraction must be in (0,1)");
    }
};

struct FoldIndices {
    std::vector<int> train, test;
};

/// Repeated random train/test splits (not cross-validation partitions): each
/// fold shuffles all indices with its own derived seed and carves off the
/// test fraction.
inline std::vector<FoldIndices> make_folds(const Dataset& ds, const FoldSpec& spec) {
    spec.validate();
    const int n = ds.size();
    if (n < 2) throw DataError("make_folds: need at least 2 examples");
    const int n_test = static_cast<int>(std::floor(spec.test_fraction * n));
    if (n_test < 1 || n_test >= n)
        throw DataError("make_folds: test_fraction yields an empty train or test split");

    std::vector<FoldIndices> folds;
    folds.reserve(spec.n_folds);
    for (int f = 0; f < spec.n_folds; ++f) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        Rng rng(derive_seed(spec.seed, tag_hash("fold"), static_cast<uint64_t>(f)));
        rng.shuffle(order);
        FoldIndices fold;
        fold.test.assign(order.begin(), order.begin() + n_test);
        fold.train.assign(order.begin() + n_test, order.end());
        folds.push_back(std::move(fold));
    }
    return folds;
}

/// Zero-mean unit-variance transform fit on the training split only.
/// Population standard deviation; zero-variance columns are left unscaled.
struct Standardizer {
    std::vector<double> feature_mean, feature_scale;
    double target_mean{0.0};
    double target_scale{1.0};

    static Standardizer fit(const Dataset& train) {
        train.validate();
        const int n = train.size(), d = train.dim();
        Standardizer s;
        s.feature_mean.assign(d, 0.0);
        s.feature_scale.assign(d, 1.0);
        for (int j = 0; j < d; ++j) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += train.features(i, j);
            mean /= n;
            double var = 0.0;
            for (int i = 0; i < n; ++i) {
                const double c = train.features(i, j) - mean;
                var += c * c;
            }
            var /= n;
            s.feature_mean[j] = mean;
            s.feature_scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
        }
        if (train.task == TaskKind::Regression) {
            double mean = 0.0;
            for (double y : train.targets_real) mean += y;
            mean /= n;
            double var = 0.0;
            for (double y : train.targets_real) var += (y - mean) * (y - mean);
            var /= n;
            s.target_mean = mean;
            s.target_scale = var > 0.0 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Dataset apply(const Dataset& ds) const {
        Dataset out = ds;
        for (int i = 0; i < out.size(); ++i)
            for (int j = 0; j < out.dim(); ++j)
                out.features(i, j) = (out.features(i, j) - feature_mean[j]) / feature_scale[j];
        if (ds.task == TaskKind::Regression)
            for (double& y : out.targets_real) y = (y - target_mean) / target_scale;
        recompute_ranges(out);
        return out;
    }

    std::vector<double> transform_features(std::span<const double> x) const {
        std::vector<double> out(x.size());
        for (size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - feature_mean[j]) / feature_scale[j];
        return out;
    }

    /// Map a predictive Gaussian from standardized back to original target units.
    GaussianOutput target_to_original(const GaussianOutput& g) const {
        return {g.mean * target_scale + target_mean, g.variance * target_scale * target_scale};
    }

    /// Change-of-variables term: NLL in original units = standardized NLL + ln(scale).
    double target_nll_offset() const { return std::log(target_scale); }
};

/// y = x^3 + N(0, noise_sd^2) with x uniform on [lo, hi].
inline Dataset toy_cubic(int n = 20, double noise_sd = 3.0, double lo = -4.0, double hi = 4.0,
                         uint64_t seed = 0) {
    if (n < 1) throw std::invalid_argument("toy_cubic: n must be >= 1");
    Dataset ds;
    ds.task = TaskKind::Regression;
    ds.features = Matrix(n, 1);
    ds.targets_real.resize(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(lo, hi);
        ds.features(i, 0) = x;
        ds.targets_real[i] = x * x * x + rng.normal(0.0, noise_sd);
    }
    recompute_ranges(ds);
    ds.provenance = "toy_cubic";
    return ds;
}

/// N uniform draws with replacement.
inline std::vector<int> bootstrap_indices(int n, uint64_t seed) {
    if (n < 1) throw DataError("bootstrap: empty dataset");
    std::vector<int> idx(n);
    Rng rng(seed);
    for (int& i : idx) i = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
    return idx;
}

inline std::vector<int> bootstrap_sample(const Dataset& ds, uint64_t seed) {
    return bootstrap_indices(ds.size(), seed);
}

/// Partition a classification dataset by label membership. Known labels are
/// remapped to contiguous [0, |known|); the unknown split gets the sentinel
/// label and shares the known split's class count for evaluation alignment.
inline std::pair<Dataset, Dataset> class_split(const Dataset& ds, const std::set<int>& known) {
    if (ds.task != TaskKind::Classification) throw DataError("class_split: classification dataset required");
    if (known.empty()) throw DataError("class_split: known class set is empty");
    for (int c : known)
        if (c < 0 || c >= ds.num_classes) throw DataError("class_split: unknown class id in known set");
    if (static_cast<int>(known.size()) >= ds.num_classes)
        throw DataError("class_split: known set must not exhaust all classes");

    std::vector<int> remap(ds.num_classes, kUnknownClassLabel);
    int next = 0;
    for (int c : known) remap[c] = next++;  // std::set iterates in sorted order

    std::vector<int> known_rows, unknown_rows;
    for (int i = 0; i < ds.size(); ++i) {
        if (known.count(ds.targets_class[i]))
            known_rows.push_back(i);
        else
            unknown_rows.push_back(i);
    }
    if (known_rows.empty()) throw DataError("class_split: no rows with known classes");
    if (unknown_rows.empty()) throw DataError("class_split: no rows with unknown classes");

    Dataset known_ds = subset(ds, known_rows);
    for (int& c : known_ds.targets_class) c = remap[c];
    known_ds.num_classes = static_cast<int>(known.size());
    known_ds.provenance += "|known_split";

    Dataset unknown_ds = subset(ds, unknown_rows);
    for (int& c : unknown_ds.targets_class) c = kUnknownClassLabel;
    unknown_ds.num_classes = static_cast<int>(known.size());
    unknown_ds.provenance += "|unknown_split";
    return {std::move(known_ds), std::move(unknown_ds)};
}

}  // namespace uqnet
