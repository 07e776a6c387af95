#include "gradshield/dataset.hpp"

#include "gradshield/linalg.hpp"

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace gradshield {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read error on " + path.string());
  return bytes;
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::filesystem::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) {
    throw DataError("zlib init failed for " + path.string());
  }
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::array<std::uint8_t, 1 << 16> buf;
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError(path.string() + ": gzip decompression failed (zlib rc " +
                      std::to_string(rc) + ")");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

struct IdxContent {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  const std::uint8_t* payload = nullptr;
  std::size_t payload_size = 0;
};

// Big-endian IDX header: u32 magic (0x0000080[13]), one u32 per dimension.
IdxContent parse_idx(const std::vector<std::uint8_t>& bytes, int expected_rank,
                     std::uint32_t expected_magic,
                     const std::filesystem::path& path) {
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(expected_rank);
  if (bytes.size() < header) {
    throw DataError(path.string() + ": truncated IDX header");
  }
  IdxContent idx;
  idx.magic = be32(bytes.data());
  if (idx.magic != expected_magic) {
    char got[16], want[16];
    std::snprintf(got, sizeof got, "0x%08x", idx.magic);
    std::snprintf(want, sizeof want, "0x%08x", expected_magic);
    throw DataError(path.string() + ": bad IDX magic " + got + ", expected " + want);
  }
  std::size_t count = 1;
  for (int d = 0; d < expected_rank; ++d) {
    const std::uint32_t v = be32(bytes.data() + 4 + 4 * d);
    idx.dims.push_back(v);
    count *= v;
  }
  if (bytes.size() < header + count) {
    throw DataError(path.string() + ": truncated IDX payload (header promises " +
                    std::to_string(count) + " bytes, file holds " +
                    std::to_string(bytes.size() - header) + ")");
  }
  idx.payload = bytes.data() + header;
  idx.payload_size = count;
  return idx;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (is_gzip(bytes)) return gunzip(bytes, path);
  return bytes;
}

}  // namespace

MatF one_hot(const Labels& labels, int classes) {
  MatF out = MatF::Zero(labels.size(), classes);
  for (Index i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= classes) {
      throw DataError("label " + std::to_string(c) + " outside [0, " +
                      std::to_string(classes - 1) + "] at row " + std::to_string(i));
    }
    out(i, c) = 1.0f;
  }
  return out;
}

LabeledDataset load_idx_pair(const std::filesystem::path& images_path,
                             const std::filesystem::path& labels_path) {
  const auto image_bytes = read_maybe_gzip(images_path);
  const auto label_bytes = read_maybe_gzip(labels_path);
  const IdxContent images = parse_idx(image_bytes, 3, kImagesMagic, images_path);
  const IdxContent labels = parse_idx(label_bytes, 1, kLabelsMagic, labels_path);

  if (images.dims[0] != labels.dims[0]) {
    throw DataError("image/label count mismatch: " + images_path.string() +
                    " has " + std::to_string(images.dims[0]) + ", " +
                    labels_path.string() + " has " + std::to_string(labels.dims[0]));
  }

  const Index n = static_cast<Index>(images.dims[0]);
  const Index dim = static_cast<Index>(images.dims[1]) * static_cast<Index>(images.dims[2]);

  LabeledDataset ds;
  ds.images.resize(n, dim);
  for (Index i = 0; i < n * dim; ++i) {
    ds.images.data()[i] = static_cast<float>(images.payload[i]) / 255.0f;
  }
  ds.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<int>(labels.payload[i]);
  }
  ds.labels_onehot = one_hot(ds.labels);
  return ds;
}

LabeledDataset LabeledDataset::subset(const std::vector<Index>& idx) const {
  LabeledDataset out;
  out.images = take_rows(images, idx);
  out.labels_onehot = take_rows(labels_onehot, idx);
  out.labels = take_rows(labels, idx);
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_random(const LabeledDataset& ds,
                                                       Index n_first, Rng& rng) {
  const Index n = ds.size();
  if (n_first <= 0 || n_first >= n) {
    throw ShapeError("split_random: n_first " + std::to_string(n_first) +
                     " out of range (0, " + std::to_string(n) + ")");
  }
  const std::vector<Index> order = shuffled_indices(n, rng);
  const std::vector<Index> first(order.begin(), order.begin() + n_first);
  const std::vector<Index> rest(order.begin() + n_first, order.end());
  return {ds.subset(first), ds.subset(rest)};
}

const std::array<std::string_view, 10>& fashion_class_names() {
  static const std::array<std::string_view, 10> names = {
      "top",  "trouser", "pullover", "dress",   "coat",
      "sandal", "shirt",   "sneaker",  "bag", "boot"};
  return names;
}

DatasetPaths locate_dataset(const std::filesystem::path& data_root,
                            const std::string& dataset_name) {
  const auto dir = data_root / dataset_name;
  auto resolve = [&](const char* stem) {
    const auto raw = dir / stem;
    if (std::filesystem::exists(raw)) return raw;
    auto gz = raw;
    gz += ".gz";
    if (std::filesystem::exists(gz)) return gz;
    throw DataError("dataset file not found: " + raw.string() + " (or .gz)");
  };
  DatasetPaths p;
  p.train_images = resolve("train-images-idx3-ubyte");
  p.train_labels = resolve("train-labels-idx1-ubyte");
  p.test_images = resolve("t10k-images-idx3-ubyte");
  p.test_labels = resolve("t10k-labels-idx1-ubyte");
  return p;
}

}  // namespace gradshield
