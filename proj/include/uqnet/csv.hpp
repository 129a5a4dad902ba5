#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uqnet/data.hpp"

namespace uqnet {

struct CsvSchema {
    std::string target_column;  // header name of the target
    TaskKind task{TaskKind::Regression};
};

namespace detail {

/// RFC-4180-style field splitting: quoted fields may contain commas and
/// doubled quotes. Unterminated quotes are a parse error.
inline std::vector<std::string> split_csv_line(const std::string& line, size_t row_for_errors) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (in_quotes)
        throw DataError("csv: unterminated quote at row " + std::to_string(row_for_errors));
    fields.push_back(cur);
    return fields;
}

inline double parse_csv_number(const std::string& field, size_t row, const std::string& col) {
    const char* b = field.data();
    const char* e = b + field.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
    double v = 0.0;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e)
        throw DataError("csv: malformed numeric value '" + field + "' at row " +
                        std::to_string(row) + ", column '" + col + "'");
    if (!std::isfinite(v))
        throw DataError("csv: non-finite value at row " + std::to_string(row) + ", column '" +
                        col + "'");
    return v;
}

}  // namespace detail

/// Load a numeric CSV with a header row. All non-target columns become
/// features in header order. Row numbers in errors are 1-based file lines
/// (header is line 1).
inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty file '" + path + "'");
    const auto header = detail::split_csv_line(line, 1);

    int target_idx = -1;
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == schema.target_column) target_idx = static_cast<int>(i);
    if (target_idx < 0)
        throw DataError("csv: target column '" + schema.target_column + "' not found in '" +
                        path + "'");

    const int dim = static_cast<int>(header.size()) - 1;
    if (dim < 1) throw DataError("csv: no feature columns in '" + path + "'");

    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line, line_no);
        if (fields.size() != header.size())
            throw DataError("csv: row " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        std::vector<double> feat(dim);
        int j = 0;
        for (size_t i = 0; i < fields.size(); ++i) {
            const double v = detail::parse_csv_number(fields[i], line_no, header[i]);
            if (static_cast<int>(i) == target_idx)
                targets.push_back(v);
            else
                feat[j++] = v;
        }
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw DataError("csv: no data rows in '" + path + "' (empty table)");

    Dataset ds;
    ds.task = schema.task;
    ds.features = Matrix(static_cast<int>(rows.size()), dim);
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < dim; ++j) ds.features(static_cast<int>(i), j) = rows[i][j];

    if (schema.task == TaskKind::Regression) {
        ds.targets_real = std::move(targets);
    } else {
        ds.targets_class.reserve(targets.size());
        int max_class = -1;
        for (size_t i = 0; i < targets.size(); ++i) {
            const double t = targets[i];
            const int c = static_cast<int>(t);
            if (static_cast<double>(c) != t || c < 0)
                throw DataError("csv: target at data row " + std::to_string(i + 2) +
                                " is not a non-negative integer class index");
            ds.targets_class.push_back(c);
            max_class = std::max(max_class, c);
        }
        ds.num_classes = max_class + 1;
        if (ds.num_classes < 2) throw DataError("csv: classification needs at least 2 classes");
    }
    recompute_ranges(ds);
    ds.provenance = "csv:" + path;
    ds.validate();
    return ds;
}

}  // namespace uqnet
