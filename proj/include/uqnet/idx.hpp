#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "uqnet/data.hpp"

namespace uqnet {

namespace detail {

inline uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("idx: truncated header in '" + path + "'");
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace detail

inline constexpr uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr uint32_t kIdxLabelsMagic = 0x00000801;

/// Load an IDX image/label pair (big-endian magic + dims + payload bytes).
/// Pixels come out flattened as reals in [0,255]; at most `limit` examples.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int limit) {
    if (limit < 1) throw DataError("idx: limit must be >= 1 (empty dataset)");

    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("idx: cannot open file '" + images_path + "'");
    const uint32_t img_magic = detail::read_be_u32(img, images_path);
    if (img_magic != kIdxImagesMagic)
        throw DataError("idx: bad magic in '" + images_path + "' (expected 0x00000803)");
    const uint32_t n_images = detail::read_be_u32(img, images_path);
    const uint32_t n_rows = detail::read_be_u32(img, images_path);
    const uint32_t n_cols = detail::read_be_u32(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("idx: cannot open file '" + labels_path + "'");
    const uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
    if (lab_magic != kIdxLabelsMagic)
        throw DataError("idx: bad magic in '" + labels_path + "' (expected 0x00000801)");
    const uint32_t n_labels = detail::read_be_u32(lab, labels_path);

    if (n_images != n_labels)
        throw DataError("idx: image count " + std::to_string(n_images) +
                        " does not match label count " + std::to_string(n_labels));
    if (n_images == 0) throw DataError("idx: empty dataset in '" + images_path + "'");

    const int n = static_cast<int>(std::min<uint32_t>(n_images, static_cast<uint32_t>(limit)));
    const int dim = static_cast<int>(n_rows * n_cols);
    if (dim < 1) throw DataError("idx: zero-sized images in '" + images_path + "'");

    Dataset ds;
    ds.task = TaskKind::Classification;
    ds.features = Matrix(n, dim);
    ds.targets_class.resize(n);

    std::vector<unsigned char> pixel_row(dim);
    int max_label = -1;
    for (int i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_row.data()), dim))
            throw DataError("idx: truncated image payload in '" + images_path + "' at image " +
                            std::to_string(i));
        for (int j = 0; j < dim; ++j) ds.features(i, j) = static_cast<double>(pixel_row[j]);
        unsigned char label = 0;
        if (!lab.read(reinterpret_cast<char*>(&label), 1))
            throw DataError("idx: truncated label payload in '" + labels_path + "' at label " +
                            std::to_string(i));
        ds.targets_class[i] = static_cast<int>(label);
        max_label = std::max(max_label, ds.targets_class[i]);
    }
    ds.num_classes = max_label + 1;
    if (ds.num_classes < 2) throw DataError("idx: fewer than 2 classes present");
    recompute_ranges(ds);
    ds.provenance = "idx:" + images_path;
    ds.validate();
    return ds;
}

}  // namespace uqnet
