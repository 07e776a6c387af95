#pragma once

#include "gradshield/common.hpp"
#include "gradshield/rng.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gradshield {

// Images normalized to [0,1], one sample per row; labels kept both raw and
// one-hot encoded.
struct LabeledDataset {
  MatF images;         // N x dim
  MatF labels_onehot;  // N x 10
  Labels labels;       // N

  Index size() const { return images.rows(); }
  Index dim() const { return images.cols(); }

  LabeledDataset subset(const std::vector<Index>& idx) const;
};

// One-hot rows over 10 classes.
MatF one_hot(const Labels& labels, int classes = 10);

// Load an IDX image/label pair (raw or gzip-compressed; gzip is detected by
// the 1f 8b prefix). Pixel bytes are divided by 255.
LabeledDataset load_idx_pair(const std::filesystem::path& images_path,
                             const std::filesystem::path& labels_path);

// Disjoint seeded partition: first part has n_first samples. The union of
// both parts is a permutation of the input.
std::pair<LabeledDataset, LabeledDataset> split_random(const LabeledDataset& ds,
                                                       Index n_first, Rng& rng);

// Class names as reported for the fashion dataset.
const std::array<std::string_view, 10>& fashion_class_names();

// Conventional file layout under a data root: <root>/<dataset>/<idx file>,
// dataset in {mnist, fashion_mnist}; ".gz" variants are picked up when the
// raw file is absent. Throws DataError naming the missing path.
struct DatasetPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
DatasetPaths locate_dataset(const std::filesystem::path& data_root,
                            const std::string& dataset_name);

}  // namespace gradshield
