#include "fetch.hpp"

#include "gradshield/common.hpp"
#include "gradshield/dataset.hpp"

#ifdef GRADSHIELD_HAS_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <vector>

namespace gradshield::cli {

namespace {

struct Mirror {
  std::string scheme_host;  // e.g. "https://example.com"
  std::string base_path;    // e.g. "/mnist/"
};

const std::vector<Mirror>& mirrors_for(const std::string& dataset) {
  static const std::vector<Mirror> mnist = {
      {"https://ossci-datasets.s3.amazonaws.com", "/mnist/"},
      {"https://storage.googleapis.com", "/cvdf-datasets/mnist/"},
  };
  static const std::vector<Mirror> fashion = {
      {"http://fashion-mnist.s3-website.eu-central-1.amazonaws.com", "/"},
      {"https://github.com", "/zalandoresearch/fashion-mnist/raw/master/data/fashion/"},
  };
  if (dataset == "mnist") return mnist;
  if (dataset == "fashion_mnist") return fashion;
  throw ConfigError("fetch: unknown dataset '" + dataset + "'");
}

const std::vector<std::string>& idx_file_names() {
  static const std::vector<std::string> names = {
      "train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
      "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"};
  return names;
}

bool download(const Mirror& mirror, const std::string& file,
              const std::filesystem::path& dest, std::string* error) {
#ifndef GRADSHIELD_HAS_TLS
  if (mirror.scheme_host.rfind("https://", 0) == 0) {
    *error = "built without TLS support";
    return false;
  }
#endif
  httplib::Client client(mirror.scheme_host);
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  auto res = client.Get(mirror.base_path + file);
  if (!res) {
    *error = httplib::to_string(res.error());
    return false;
  }
  if (res->status != 200) {
    *error = "HTTP " + std::to_string(res->status);
    return false;
  }
  if (res->body.size() < 2 || static_cast<unsigned char>(res->body[0]) != 0x1f ||
      static_cast<unsigned char>(res->body[1]) != 0x8b) {
    *error = "response is not gzip data";
    return false;
  }
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
  return static_cast<bool>(out);
}

}  // namespace

void fetch_dataset(const std::string& dataset, const std::filesystem::path& data_dir) {
  const auto& mirrors = mirrors_for(dataset);
  const auto dir = data_dir / dataset;
  std::filesystem::create_directories(dir);

  std::string failures;
  for (const auto& file : idx_file_names()) {
    const auto dest = dir / file;
    if (std::filesystem::exists(dest)) {
      std::printf("fetch: %s already present\n", dest.c_str());
      continue;
    }
    bool ok = false;
    for (const auto& mirror : mirrors) {
      std::string error;
      std::printf("fetch: %s%s%s ...\n", mirror.scheme_host.c_str(),
                  mirror.base_path.c_str(), file.c_str());
      if (download(mirror, file, dest, &error)) {
        std::printf("fetch: wrote %s\n", dest.c_str());
        ok = true;
        break;
      }
      failures += "  " + mirror.scheme_host + mirror.base_path + file + ": " + error + "\n";
    }
    if (!ok) {
      throw DataError("fetch: could not download " + file + ":\n" + failures +
                      "Place the files manually under " + dir.string() + "/");
    }
  }

  // Parse what landed so a bad download fails loudly now, not mid-run.
  const DatasetPaths paths = locate_dataset(data_dir, dataset);
  const LabeledDataset train = load_idx_pair(paths.train_images, paths.train_labels);
  const LabeledDataset test = load_idx_pair(paths.test_images, paths.test_labels);
  std::printf("fetch: %s ok (%lld train, %lld test)\n", dataset.c_str(),
              static_cast<long long>(train.size()), static_cast<long long>(test.size()));
}

}  // namespace gradshield::cli
