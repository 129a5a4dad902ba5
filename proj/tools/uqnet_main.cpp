// uqnet command-line driver: train deep ensembles of probabilistic MLPs and
// run the uncertainty-evaluation experiments (toy curves, fold benchmarks,
// ensemble-size sweeps, known/unknown entropy, interval calibration).
//
// Every command is a pure function of (config file, flags, seed): reruns emit
// byte-identical artifacts, and --workers only changes wall time.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uqnet/csv.hpp"
#include "uqnet/experiments.hpp"
#include "uqnet/idx.hpp"

namespace {

using nlohmann::json;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw uqnet::ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw uqnet::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw uqnet::ConfigError("config file must hold a JSON object");
    return j;
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}

// Dataset sources are described under config key "dataset":
//   {"csv": {"path": ..., "target": ..., "task": "regression"|"classification"}}
//   {"idx": {"images": ..., "labels": ..., "limit": N}}
uqnet::Dataset load_dataset(const json& cfg) {
    if (!cfg.contains("dataset"))
        throw uqnet::ConfigError("no dataset configured (use --csv/--images or a config file)");
    const json& d = cfg.at("dataset");
    if (d.contains("csv")) {
        const json& c = d.at("csv");
        uqnet::CsvSchema schema;
        schema.target_column = c.at("target").get<std::string>();
        std::string task = "regression";
        read_key(c, "task", task);
        schema.task = task == "classification" ? uqnet::TaskKind::Classification
                                               : uqnet::TaskKind::Regression;
        return uqnet::load_csv(c.at("path").get<std::string>(), schema);
    }
    if (d.contains("idx")) {
        const json& c = d.at("idx");
        int limit = 1000000;
        read_key(c, "limit", limit);
        return uqnet::load_idx(c.at("images").get<std::string>(),
                               c.at("labels").get<std::string>(), limit);
    }
    throw uqnet::ConfigError("dataset config needs a 'csv' or 'idx' block");
}

struct CommonFlags {
    std::string config_path;
    uint64_t seed{0};
    std::string out_dir;
    int workers{0};
    int members{0};
    std::string variant;
    bool print_config{false};

    CLI::Option* seed_opt{nullptr};
    CLI::Option* out_opt{nullptr};
    CLI::Option* workers_opt{nullptr};
    CLI::Option* members_opt{nullptr};
    CLI::Option* variant_opt{nullptr};

    void attach(CLI::App* cmd, bool with_variant) {
        cmd->add_option("--config", config_path, "JSON config file");
        seed_opt = cmd->add_option("--seed", seed, "master seed for all randomness");
        out_opt = cmd->add_option("--out", out_dir, "output directory");
        workers_opt = cmd->add_option("--workers", workers, "worker threads for member training");
        members_opt = cmd->add_option("--members", members, "ensemble size M");
        if (with_variant) variant_opt = cmd->add_option("--variant", variant, "model variant tag");
        cmd->add_flag("--print-config", print_config, "print the resolved config and exit");
    }

    /// Overlay parsed flags onto the config-file JSON (flags win).
    void merge_into(json& cfg) const {
        if (seed_opt->count()) cfg["seed"] = seed;
        if (out_opt->count()) cfg["out"] = out_dir;
        if (workers_opt->count()) cfg["workers"] = workers;
        if (members_opt->count()) cfg["members"] = members;
        if (variant_opt && variant_opt->count()) cfg["variant"] = variant;
    }
};

struct DatasetFlags {
    std::string csv_path, target;
    bool classification{false};
    std::string images, labels;
    int limit{0};

    CLI::Option* csv_opt{nullptr};
    CLI::Option* images_opt{nullptr};
    CLI::Option* limit_opt{nullptr};

    void attach(CLI::App* cmd) {
        csv_opt = cmd->add_option("--csv", csv_path, "CSV dataset path (header row)");
        cmd->add_option("--target", target, "CSV target column name");
        cmd->add_flag("--classification", classification, "treat CSV target as class indices");
        images_opt = cmd->add_option("--images", images, "IDX image file");
        cmd->add_option("--labels", labels, "IDX label file");
        limit_opt = cmd->add_option("--limit", limit, "cap on IDX examples");
    }

    void merge_into(json& cfg) const {
        if (csv_opt->count()) {
            json c{{"path", csv_path}, {"target", target}};
            c["task"] = classification ? "classification" : "regression";
            cfg["dataset"] = json{{"csv", c}};
        } else if (images_opt->count()) {
            json c{{"images", images}, {"labels", labels}};
            if (limit_opt->count()) c["limit"] = limit;
            cfg["dataset"] = json{{"idx", c}};
        }
    }
};

void read_common(const json& cfg, uint64_t& seed, int& workers, std::filesystem::path& out) {
    read_key(cfg, "seed", seed);
    read_key(cfg, "workers", workers);
    read_path(cfg, "out", out);
}

int finish(const json& resolved, bool print_config, const std::function<void()>& run) {
    if (print_config) {
        std::cout << resolved.dump(2) << "\n";
        return 0;
    }
    run();
    return 0;
}

// --------------------------------------------------------------------------

int cmd_toy(const json& cfg, bool print_config) {
    uqnet::ToyOptions o;
    read_key(cfg, "n_train", o.n_train);
    read_key(cfg, "noise_sd", o.noise_sd);
    read_key(cfg, "train_lo", o.train_lo);
    read_key(cfg, "train_hi", o.train_hi);
    read_key(cfg, "grid_lo", o.grid_lo);
    read_key(cfg, "grid_hi", o.grid_hi);
    read_key(cfg, "grid_points", o.grid_points);
    read_key(cfg, "n_test", o.n_test);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "members", o.members);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    read_common(cfg, o.seed, o.workers, o.out_dir);
    return finish(o.to_json(), print_config, [&] { uqnet::run_toy(o); });
}

int cmd_regress(const json& cfg, bool print_config) {
    uqnet::RegressOptions o;
    std::string variant = "ml-M";
    read_key(cfg, "variant", variant);
    read_key(cfg, "members", o.members);
    o.variant = uqnet::parse_variant(variant);
    read_key(cfg, "n_folds", o.n_folds);
    read_key(cfg, "test_fraction", o.test_fraction);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    bool bootstrap = false;
    read_key(cfg, "bootstrap", bootstrap);
    o.sampling = bootstrap ? uqnet::DataSampling::Bootstrap : uqnet::DataSampling::FullShuffled;
    read_common(cfg, o.seed, o.workers, o.out_dir);
    if (print_config) return finish(o.to_json(), true, [] {});
    const uqnet::Dataset ds = load_dataset(cfg);
    if (cfg.contains("test_dataset")) {
        json test_cfg{{"dataset", cfg.at("test_dataset")}};
        const uqnet::Dataset test_ds = load_dataset(test_cfg);
        uqnet::run_regress_fixed(ds, test_ds, o);
    } else {
        uqnet::run_regress(ds, o);
    }
    return 0;
}

int cmd_classify(const json& cfg, bool print_config) {
    uqnet::ClassifyOptions o;
    read_key(cfg, "m_grid", o.m_grid);
    if (cfg.contains("members")) {  // --members M means grid 1..M
        const int m = cfg.at("members").get<int>();
        o.m_grid.clear();
        for (int i = 1; i <= m; ++i) o.m_grid.push_back(i);
    }
    read_key(cfg, "test_fraction", o.test_fraction);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    read_key(cfg, "mc_dropout_rate", o.mc_dropout_rate);
    read_common(cfg, o.seed, o.workers, o.out_dir);
    if (print_config) return finish(o.to_json(), true, [] {});
    const uqnet::Dataset ds = load_dataset(cfg);
    uqnet::run_classify(ds, o);
    return 0;
}

int cmd_ood(const json& cfg, bool print_config) {
    uqnet::OodOptions o;
    std::vector<int> known{0, 1, 2, 3, 4};
    read_key(cfg, "known_classes", known);
    o.known_classes = std::set<int>(known.begin(), known.end());
    read_key(cfg, "m_grid", o.m_grid);
    if (cfg.contains("members")) {
        const int m = cfg.at("members").get<int>();
        o.m_grid = {1, m};
    }
    read_key(cfg, "test_fraction", o.test_fraction);
    read_key(cfg, "histogram_bins", o.histogram_bins);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    read_key(cfg, "mc_dropout_rate", o.mc_dropout_rate);
    read_common(cfg, o.seed, o.workers, o.out_dir);
    if (print_config) return finish(o.to_json(), true, [] {});

    if (cfg.contains("unknown_dataset")) {
        json known_cfg = cfg;
        const uqnet::Dataset known_ds = load_dataset(known_cfg);
        json unknown_cfg{{"dataset", cfg.at("unknown_dataset")}};
        const uqnet::Dataset unknown_ds = load_dataset(unknown_cfg);
        uqnet::run_ood_two_sources(known_ds, unknown_ds, o);
    } else {
        const uqnet::Dataset ds = load_dataset(cfg);
        uqnet::run_ood(ds, o);
    }
    return 0;
}

int cmd_calibrate(const json& cfg, bool print_config) {
    uqnet::CalibrateOptions o;
    read_key(cfg, "test_fraction", o.test_fraction);
    read_key(cfg, "members", o.members);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    read_common(cfg, o.seed, o.workers, o.out_dir);
    if (print_config) return finish(o.to_json(), true, [] {});
    const uqnet::Dataset ds = load_dataset(cfg);
    uqnet::run_calibrate(ds, o);
    return 0;
}

int cmd_train(const json& cfg, bool print_config) {
    uqnet::TrainOptions o;
    std::string variant = "ml-M";
    read_key(cfg, "variant", variant);
    read_key(cfg, "members", o.members);
    o.variant = uqnet::parse_variant(variant);
    read_key(cfg, "hidden_sizes", o.hidden_sizes);
    read_key(cfg, "epochs", o.epochs);
    read_key(cfg, "batch_size", o.batch_size);
    read_key(cfg, "learning_rate", o.learning_rate);
    read_key(cfg, "eps_fraction", o.eps_fraction);
    read_key(cfg, "mc_dropout_rate", o.mc_dropout_rate);
    read_key(cfg, "bootstrap", o.bootstrap);
    read_common(cfg, o.seed, o.workers, o.out_dir);
    if (print_config) return finish(o.to_json(), true, [] {});
    const uqnet::Dataset ds = load_dataset(cfg);
    uqnet::run_train(ds, o);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uqnet: deep-ensemble predictive uncertainty experiments"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* cmd;
        CommonFlags common;
        DatasetFlags dataset;
        std::string unknown_images, unknown_labels;
        std::vector<int> known_ids;
        CLI::Option* unknown_opt{nullptr};
        CLI::Option* known_opt{nullptr};
        int (*runner)(const json&, bool);
    };

    // options bind to field addresses, so each Sub needs a stable home
    std::vector<std::unique_ptr<Sub>> subs;
    auto add = [&](const char* name, const char* desc, bool with_variant, bool with_dataset,
                   int (*runner)(const json&, bool)) {
        subs.push_back(std::make_unique<Sub>());
        Sub& s = *subs.back();
        s.cmd = app.add_subcommand(name, desc);
        s.common.attach(s.cmd, with_variant);
        if (with_dataset) s.dataset.attach(s.cmd);
        s.runner = runner;
        return &s;
    };

    add("toy", "cubic toy regression with the four reference variants", false, false, cmd_toy);
    Sub* regress = add("regress", "fold-based regression benchmark for one variant", true, true,
                       cmd_regress);
    std::string regress_test_csv;
    auto* regress_test_opt = regress->cmd->add_option(
        "--test-csv", regress_test_csv, "fixed test-split CSV (disables random folds)");
    add("classify", "accuracy/NLL/Brier as a function of ensemble size", false, true, cmd_classify);
    Sub* ood = add("ood", "entropy on known vs unknown classes + confidence curves", false, true,
                   cmd_ood);
    ood->known_opt = ood->cmd->add_option(
        "--known", ood->known_ids, "known class ids (others become out-of-distribution)");
    ood->unknown_opt =
        ood->cmd->add_option("--unknown-images", ood->unknown_images, "IDX images of unknown classes");
    ood->cmd->add_option("--unknown-labels", ood->unknown_labels, "IDX labels of unknown classes");
    add("calibrate", "interval coverage: learned variance vs empirical variance", false, true,
        cmd_calibrate);
    add("train", "train one variant on a full dataset and save the model", true, true, cmd_train);

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& sp : subs) {
            Sub& s = *sp;
            if (!s.cmd->parsed()) continue;
            json cfg = load_config_file(s.common.config_path);
            s.common.merge_into(cfg);
            if (s.cmd->get_name() != "toy") s.dataset.merge_into(cfg);
            if (s.cmd->get_name() == "regress" && regress_test_opt->count())
                cfg["test_dataset"] = json{{"csv",
                                            {{"path", regress_test_csv},
                                             {"target", s.dataset.target},
                                             {"task", "regression"}}}};
            if (s.cmd->get_name() == "ood") {
                if (s.known_opt->count()) cfg["known_classes"] = s.known_ids;
                if (s.unknown_opt->count())
                    cfg["unknown_dataset"] = json{
                        {"idx", {{"images", s.unknown_images}, {"labels", s.unknown_labels}}}};
            }
            return s.runner(cfg, s.common.print_config);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
