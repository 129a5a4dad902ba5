#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqnet/evaluate.hpp"

namespace uqnet {

/// Shortest round-trip decimal form, locale-independent. Keeps every emitted
/// table byte-stable across reruns.
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_string() const {
        std::string s;
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) s += ',';
            s += header[i];
        }
        s += '\n';
        for (const auto& row : rows) {
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) s += ',';
                s += row[i];
            }
            s += '\n';
        }
        return s;
    }
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    write_text_file(path, table.to_string());
}

inline CsvTable calibration_to_csv(const CalibrationTable& t) {
    CsvTable csv;
    csv.header = {"nominal", "observed", "count"};
    for (const auto& r : t.rows)
        csv.rows.push_back({fmt_double(r.nominal), fmt_double(r.observed), std::to_string(r.count)});
    return csv;
}

inline CsvTable histogram_to_csv(const EntropyHistogram& h) {
    CsvTable csv;
    csv.header = {"bin_lo", "bin_hi", "mass"};
    for (size_t b = 0; b + 1 < h.edges.size(); ++b)
        csv.rows.push_back({fmt_double(h.edges[b]), fmt_double(h.edges[b + 1]),
                            fmt_double(h.masses[b])});
    return csv;
}

inline CsvTable curve_to_csv(const ConfidenceAccuracyCurve& c) {
    CsvTable csv;
    csv.header = {"tau", "accuracy", "retained"};
    for (const auto& p : c.points)
        csv.rows.push_back({fmt_double(p.tau), fmt_double(p.accuracy), std::to_string(p.retained)});
    return csv;
}

namespace detail {

inline nlohmann::json opt_number(const std::optional<double>& v) {
    if (!v || std::isnan(*v)) return nullptr;
    return *v;
}

inline nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j{{"task", to_string(rep.task)},
                     {"n_examples", rep.n_examples},
                     {"nll", rep.nll},
                     {"mean_disagreement", rep.mean_disagreement}};
    if (rep.task == TaskKind::Regression) {
        j["rmse"] = detail::opt_number(rep.rmse);
        if (rep.calibration) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : rep.calibration->rows)
                rows.push_back({{"nominal", r.nominal}, {"observed", r.observed}, {"count", r.count}});
            j["calibration"] = rows;
        }
    } else {
        j["brier"] = detail::opt_number(rep.brier);
        j["accuracy"] = detail::opt_number(rep.accuracy);
        j["top_k"] = rep.top_k;
        j["top_k_error"] = detail::opt_number(rep.top_k_error);
        j["mean_entropy"] = detail::opt_number(rep.mean_entropy);
        if (rep.entropy_hist)
            j["entropy_histogram"] = {{"edges", rep.entropy_hist->edges},
                                      {"masses", rep.entropy_hist->masses}};
        if (rep.confidence_curve) {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& p : rep.confidence_curve->points)
                pts.push_back({{"tau", p.tau},
                               {"accuracy", detail::number_or_null(p.accuracy)},
                               {"retained", p.retained}});
            j["confidence_accuracy"] = pts;
        }
    }
    return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace uqnet
