#include "gradshield/model_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <vector>

namespace gradshield {

namespace {

constexpr std::array<char, 4> kMlpMagic = {'M', 'L', 'P', '1'};
constexpr std::array<char, 4> kAdvMagic = {'A', 'D', 'V', '1'};

const std::array<std::uint32_t, 256>& crc_table() {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  return table;
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32s(const float* data, std::size_t count) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + count * sizeof(float));
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  void f32s(float* out, std::size_t count) {
    auto b = take(count * sizeof(float));
    std::memcpy(out, b.data(), b.size());
  }
  std::size_t consumed() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) {
      throw DataError(what_ + ": truncated file (needed " + std::to_string(n) +
                      " more bytes, have " + std::to_string(remaining()) + ")");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read error on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write error on " + path.string());
}

void check_magic(ByteReader& r, const std::array<char, 4>& expect,
                 const std::filesystem::path& path) {
  std::array<char, 4> got{};
  for (auto& c : got) c = static_cast<char>(r.u8());
  if (got != expect) {
    throw DataError(path.string() + ": bad magic \"" + std::string(got.data(), 4) +
                    "\", expected \"" + std::string(expect.data(), 4) + "\"");
  }
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  const auto& table = crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::uint8_t b : bytes) {
    c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

void save_model_f32(const MlpModel<float>& model, const std::filesystem::path& path) {
  validate_layer_chain(model.layers);
  ByteWriter payload;
  payload.u32(static_cast<std::uint32_t>(model.layer_count()));
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const auto& l = model.layers[i];
    payload.u32(static_cast<std::uint32_t>(l.in_dim));
    payload.u32(static_cast<std::uint32_t>(l.out_dim));
    payload.u8(static_cast<std::uint8_t>(l.activation));
    payload.f32s(model.weights[i].data(), static_cast<std::size_t>(model.weights[i].size()));
    payload.f32s(model.biases[i].data(), static_cast<std::size_t>(model.biases[i].size()));
  }

  ByteWriter out;
  for (char c : kMlpMagic) out.u8(static_cast<std::uint8_t>(c));
  for (auto b : payload.bytes()) out.u8(b);
  out.u32(crc32(payload.bytes()));
  write_file(path, out.bytes());
}

MlpModel<float> load_model_f32(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  check_magic(r, kMlpMagic, path);

  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024) {
    throw DataError(path.string() + ": corrupted header, layer count " +
                    std::to_string(n_layers));
  }
  MlpModel<float> model;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec spec;
    spec.in_dim = static_cast<Index>(r.u32());
    spec.out_dim = static_cast<Index>(r.u32());
    const std::uint8_t tag = r.u8();
    if (tag > 3) {
      throw DataError(path.string() + ": unknown activation tag " + std::to_string(tag));
    }
    spec.activation = static_cast<Activation>(tag);
    if (spec.in_dim < 1 || spec.out_dim < 1) {
      throw DataError(path.string() + ": corrupted layer dims " +
                      shape_str(spec.in_dim, spec.out_dim));
    }
    Mat<float> w(spec.in_dim, spec.out_dim);
    r.f32s(w.data(), static_cast<std::size_t>(w.size()));
    RowVec<float> b(spec.out_dim);
    r.f32s(b.data(), static_cast<std::size_t>(b.size()));
    model.layers.push_back(spec);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }

  // Payload ends here; a u32 checksum must follow.
  const std::size_t payload_end = r.consumed();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) {
    throw DataError(path.string() + ": trailing bytes after checksum");
  }
  const std::uint32_t computed =
      crc32(std::span<const std::uint8_t>(bytes).subspan(4, payload_end - 4));
  if (stored != computed) {
    throw DataError(path.string() + ": checksum mismatch (file corrupt)");
  }
  try {
    validate_layer_chain(model.layers);
  } catch (const ShapeError& e) {
    throw DataError(path.string() + ": inconsistent layer chain: " + e.what());
  }
  return model;
}

void save_adversarial(const Mat<float>& batch, const std::filesystem::path& path) {
  ByteWriter out;
  for (char c : kAdvMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(static_cast<std::uint32_t>(batch.rows()));
  out.u32(static_cast<std::uint32_t>(batch.cols()));
  out.f32s(batch.data(), static_cast<std::size_t>(batch.size()));
  write_file(path, out.bytes());
}

Mat<float> load_adversarial(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  check_magic(r, kAdvMagic, path);
  const std::uint32_t n = r.u32();
  const std::uint32_t dim = r.u32();
  Mat<float> batch(static_cast<Index>(n), static_cast<Index>(dim));
  r.f32s(batch.data(), static_cast<std::size_t>(batch.size()));
  if (r.remaining() != 0) {
    throw DataError(path.string() + ": trailing bytes");
  }
  return batch;
}

std::uint32_t file_crc32(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return crc32(bytes);
}

std::uint32_t stored_model_checksum(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8) throw DataError(path.string() + ": too short for a model file");
  ByteReader r(std::span<const std::uint8_t>(bytes).last(4), path.string());
  return r.u32();
}

}  // namespace gradshield
