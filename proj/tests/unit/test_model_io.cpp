#include "gradshield/model_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace gradshield;

namespace {

std::filesystem::path temp_file(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "gradshield_io_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

MlpModel<float> random_model(std::uint64_t seed) {
  Rng rng(seed);
  return make_mlp<float>({{7, 5, Activation::kRelu},
                          {5, 4, Activation::kSigmoid},
                          {4, 3, Activation::kSoftmax}},
                         rng);
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("crc32 matches the standard check value") {
  const char* s = "123456789";
  CHECK(crc32({reinterpret_cast<const std::uint8_t*>(s), 9}) == 0xCBF43926u);
}

TEST_CASE("save/load round trip is bitwise") {
  const auto model = random_model(7);
  const auto path = temp_file("roundtrip.mlp1");
  save_model(model, path);
  const auto loaded = load_model<float>(path);

  REQUIRE(loaded.layer_count() == model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    CHECK(loaded.weights[l] == model.weights[l]);
    CHECK(loaded.biases[l] == model.biases[l]);
    CHECK(loaded.layers[l].activation == model.layers[l].activation);
  }

  Rng rng(8);
  MatF x(4, 7);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0f, 1.0f);
  CHECK(forward(loaded, x) == forward(model, x));
}

TEST_CASE("double models save through the f32 format") {
  const auto model = random_model(9).cast<double>();
  const auto path = temp_file("f64.mlp1");
  save_model(model, path);
  const auto loaded = load_model<double>(path);
  CHECK(loaded.layer_count() == model.layer_count());
  // f64 -> f32 -> f64: values equal their f32 rounding.
  CHECK(loaded.weights[0](0, 0) ==
        static_cast<double>(static_cast<float>(model.weights[0](0, 0))));
}

TEST_CASE("truncated file is a corrupted-file error, not a crash") {
  const auto model = random_model(10);
  const auto path = temp_file("trunc.mlp1");
  save_model(model, path);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() / 2);
  dump(path, bytes);
  CHECK_THROWS_WITH_AS(load_model<float>(path), doctest::Contains("truncated"), DataError);
}

TEST_CASE("wrong magic names the expected magic") {
  const auto path = temp_file("magic.mlp1");
  dump(path, {'N', 'O', 'P', 'E', 0, 0, 0, 0});
  CHECK_THROWS_WITH_AS(load_model<float>(path), doctest::Contains("MLP1"), DataError);
}

TEST_CASE("payload corruption fails the checksum") {
  const auto model = random_model(11);
  const auto path = temp_file("crc.mlp1");
  save_model(model, path);
  auto bytes = slurp(path);
  bytes[bytes.size() - 8] ^= 0x40;  // flip a bit inside the last bias block
  dump(path, bytes);
  CHECK_THROWS_WITH_AS(load_model<float>(path), doctest::Contains("checksum"), DataError);
}

TEST_CASE("missing file reports the path") {
  CHECK_THROWS_WITH_AS(load_model<float>("/nonexistent/nowhere.mlp1"),
                       doctest::Contains("/nonexistent/nowhere.mlp1"), DataError);
}

TEST_CASE("stored checksum fingerprints distinct models") {
  // Equal-architecture files have a constant whole-file CRC (the trailer is
  // the payload CRC, which cancels it); the stored checksum does not.
  const auto path_a = temp_file("fp_a.mlp1");
  const auto path_b = temp_file("fp_b.mlp1");
  save_model(random_model(21), path_a);
  save_model(random_model(22), path_b);
  CHECK(file_crc32(path_a) == file_crc32(path_b));
  CHECK(stored_model_checksum(path_a) != stored_model_checksum(path_b));
}

TEST_CASE("adversarial dump round trip") {
  Rng rng(12);
  MatF batch(5, 6);
  for (Index i = 0; i < batch.size(); ++i) batch.data()[i] = rng.uniform(0.0f, 1.0f);
  const auto path = temp_file("batch.adv1");
  save_adversarial(batch, path);
  CHECK(load_adversarial(path) == batch);

  dump(path, {'A', 'D', 'V', '9'});
  CHECK_THROWS_AS(load_adversarial(path), DataError);
}

}  // TEST_SUITE
