#pragma once

#include <filesystem>
#include <string>

namespace gradshield::cli {

// Downloads the IDX files for `dataset` ("mnist" or "fashion_mnist") into
// <data_dir>/<dataset>/. Throws DataError with the full URL list if no mirror
// is reachable, so the files can be placed manually.
void fetch_dataset(const std::string& dataset, const std::filesystem::path& data_dir);

}  // namespace gradshield::cli
