#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "uqnet/data.hpp"
#include "uqnet/ensemble.hpp"

namespace uqnet {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "uqnet-model";

namespace detail {

inline nlohmann::json arch_to_json(const ArchSpec& a) {
    return {{"input_dim", a.input_dim},
            {"hidden_sizes", a.hidden_sizes},
            {"activation", "relu"},
            {"task", to_string(a.head.task)},
            {"num_classes", a.head.num_classes},
            {"dropout_rate", a.dropout_rate}};
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
    ArchSpec a;
    a.input_dim = j.at("input_dim").get<int>();
    a.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    if (j.at("activation").get<std::string>() != "relu")
        throw std::runtime_error("model: unsupported activation");
    const std::string task = j.at("task").get<std::string>();
    if (task == "regression")
        a.head = Head::gaussian_regression();
    else if (task == "classification")
        a.head = Head::softmax_classification(j.at("num_classes").get<int>());
    else
        throw std::runtime_error("model: unknown task '" + task + "'");
    a.dropout_rate = j.at("dropout_rate").get<double>();
    a.validate();
    return a;
}

inline nlohmann::json params_to_json(const NetworkParams& p) {
    nlohmann::json weights = nlohmann::json::array();
    for (const Matrix& w : p.weights)
        weights.push_back({{"rows", w.rows}, {"cols", w.cols}, {"data", w.data}});
    return {{"rng_seed", p.rng_seed}, {"weights", weights}, {"biases", p.biases}};
}

inline NetworkParams params_from_json(const nlohmann::json& j, const ArchSpec& arch) {
    NetworkParams p;
    p.arch = arch;
    p.rng_seed = j.at("rng_seed").get<uint64_t>();
    for (const auto& wj : j.at("weights")) {
        Matrix w(wj.at("rows").get<int>(), wj.at("cols").get<int>());
        w.data = wj.at("data").get<std::vector<double>>();
        if (w.data.size() != static_cast<size_t>(w.rows) * w.cols)
            throw std::runtime_error("model: weight payload size mismatch");
        p.weights.push_back(std::move(w));
    }
    p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    const auto dims = arch.layer_dims();
    if (p.weights.size() + 1 != dims.size() || p.biases.size() != p.weights.size())
        throw std::runtime_error("model: layer count does not match arch");
    for (size_t l = 0; l < p.weights.size(); ++l)
        if (p.weights[l].rows != dims[l] || p.weights[l].cols != dims[l + 1] ||
            static_cast<int>(p.biases[l].size()) != dims[l + 1])
            throw std::runtime_error("model: layer shape does not match arch");
    return p;
}

inline nlohmann::json standardizer_to_json(const Standardizer& s) {
    return {{"feature_mean", s.feature_mean},
            {"feature_scale", s.feature_scale},
            {"target_mean", s.target_mean},
            {"target_scale", s.target_scale}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
    Standardizer s;
    s.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    s.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    s.target_mean = j.at("target_mean").get<double>();
    s.target_scale = j.at("target_scale").get<double>();
    return s;
}

}  // namespace detail

inline nlohmann::json model_to_json(const EnsembleModel& model,
                                    const std::optional<Standardizer>& standardizer = {}) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& p : model.members) members.push_back(detail::params_to_json(p));
    nlohmann::json j{
        {"format", kModelFormatName},
        {"version", kModelFormatVersion},
        {"task", to_string(model.task)},
        {"combine", model.combine == CombineRule::EmpiricalVariance ? "empirical_variance"
                                                                    : "moment_matched"},
        {"arch", detail::arch_to_json(model.arch)},
        {"manifest",
         {{"member_seeds", model.manifest.member_seeds},
          {"config_hash", model.manifest.config_hash}}},
        {"members", members}};
    j["standardizer"] = standardizer ? detail::standardizer_to_json(*standardizer)
                                     : nlohmann::json(nullptr);
    return j;
}

struct LoadedModel {
    EnsembleModel model;
    std::optional<Standardizer> standardizer;
};

inline LoadedModel model_from_json(const nlohmann::json& j) {
    if (j.at("format").get<std::string>() != kModelFormatName)
        throw std::runtime_error("model: not a model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
        throw std::runtime_error("model: unsupported format version");
    LoadedModel out;
    out.model.arch = detail::arch_from_json(j.at("arch"));
    out.model.task = out.model.arch.head.task;
    out.model.combine = j.at("combine").get<std::string>() == "empirical_variance"
                            ? CombineRule::EmpiricalVariance
                            : CombineRule::MomentMatchedMixture;
    out.model.manifest.member_seeds =
        j.at("manifest").at("member_seeds").get<std::vector<uint64_t>>();
    out.model.manifest.config_hash = j.at("manifest").at("config_hash").get<uint64_t>();
    for (const auto& mj : j.at("members"))
        out.model.members.push_back(detail::params_from_json(mj, out.model.arch));
    if (out.model.members.empty()) throw std::runtime_error("model: no members");
    if (!j.at("standardizer").is_null())
        out.standardizer = detail::standardizer_from_json(j.at("standardizer"));
    return out;
}

/// JSON doubles round-trip bit-exactly (shortest-representation printing),
/// so save/load/save is byte-stable.
inline void save_model(const EnsembleModel& model, const std::string& path,
                       const std::optional<Standardizer>& standardizer = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("model: cannot write '" + path + "'");
    out << model_to_json(model, standardizer).dump(2) << '\n';
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("model: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace uqnet
