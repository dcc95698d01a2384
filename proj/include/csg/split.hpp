#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace csg {

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

/// Shuffles with `seed` and cuts 70/10/20: train and validation counts are rounded half up,
/// test takes the remainder. Each list is returned sorted.
DatasetSplit split_dataset(std::vector<std::string> subjects, std::uint64_t seed);

/// Text file with `[train]`, `[val]`, `[test]` sections, one id per line.
void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& path);

}  // namespace csg
