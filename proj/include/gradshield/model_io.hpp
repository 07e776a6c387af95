#pragma once

#include "gradshield/common.hpp"
#include "gradshield/net.hpp"

#include <cstdint>
#include <filesystem>
#include <span>

namespace gradshield {

// CRC32 (IEEE, reflected, poly 0xEDB88320). Used for the model-file trailer
// and for artifact hashes in run manifests.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Model file format "MLP1", little-endian:
//   magic "MLP1" | u32 layer count | per layer { u32 in_dim, u32 out_dim,
//   u8 activation tag, f32 weights row-major, f32 biases } | u32 CRC32 of
//   everything between magic and checksum.
// Weights are stored as f32 regardless of the in-memory scalar.
void save_model_f32(const MlpModel<float>& model, const std::filesystem::path& path);
MlpModel<float> load_model_f32(const std::filesystem::path& path);

template <class S>
void save_model(const MlpModel<S>& model, const std::filesystem::path& path) {
  save_model_f32(model.template cast<float>(), path);
}
template <>
inline void save_model<float>(const MlpModel<float>& model,
                              const std::filesystem::path& path) {
  save_model_f32(model, path);
}

template <class S>
MlpModel<S> load_model(const std::filesystem::path& path) {
  return load_model_f32(path).cast<S>();
}
template <>
inline MlpModel<float> load_model<float>(const std::filesystem::path& path) {
  return load_model_f32(path);
}

// Adversarial-batch dump, little-endian: "ADV1" | u32 N | u32 dim | f32 payload.
void save_adversarial(const Mat<float>& batch, const std::filesystem::path& path);
Mat<float> load_adversarial(const std::filesystem::path& path);

// CRC32 of a file's bytes, for run manifests.
std::uint32_t file_crc32(const std::filesystem::path& path);

// The stored payload checksum of an .mlp1 file (its trailing u32). Whole-file
// CRC32 is useless as a model fingerprint: a file that ends with the CRC of
// its own payload has a content-independent CRC (the residue property), so
// manifests record the payload checksum instead.
std::uint32_t stored_model_checksum(const std::filesystem::path& path);

}  // namespace gradshield
