#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace uqnet {

enum class Activation { ReLU };

enum class TaskKind { Regression, Classification };

/// Output head. Gaussian regression emits (mean, raw variance) from two
/// linear units; softmax classification emits K logits.
struct Head {
    TaskKind task{TaskKind::Regression};
    int num_classes{0};  // classification only

    static Head gaussian_regression() { return Head{TaskKind::Regression, 0}; }
    static Head softmax_classification(int k) { return Head{TaskKind::Classification, k}; }
};

struct ArchSpec {
    int input_dim{0};
    std::vector<int> hidden_sizes;
    Activation activation{Activation::ReLU};
    Head head{Head::gaussian_regression()};
    double dropout_rate{0.0};  // 0 disables dropout

    void validate() const {
        if (input_dim < 1) throw std::invalid_argument("ArchSpec: input_dim must be positive");
        if (hidden_sizes.empty()) throw std::invalid_argument("ArchSpec: at least one hidden layer required");
        for (int h : hidden_sizes)
            if (h < 1) throw std::invalid_argument("ArchSpec: hidden sizes must be positive");
        if (head.task == TaskKind::Classification && head.num_classes < 2)
            throw std::invalid_argument("ArchSpec: classification needs K >= 2");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("ArchSpec: dropout_rate must be in [0,1)");
    }

    int output_dim() const {
        return head.task == TaskKind::Regression ? 2 : head.num_classes;
    }

    /// [input_dim, hidden..., output_dim]
    std::vector<int> layer_dims() const {
        std::vector<int> dims;
        dims.reserve(hidden_sizes.size() + 2);
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
        dims.push_back(output_dim());
        return dims;
    }

    int num_layers() const { return static_cast<int>(hidden_sizes.size()) + 1; }
};

inline std::string to_string(TaskKind t) {
    return t == TaskKind::Regression ? "regression" : "classification";
}

}  // namespace uqnet
