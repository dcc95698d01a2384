#include "csg/split.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "csg/error.hpp"
#include "csg/rng.hpp"
#include "csg/text_io.hpp"

namespace csg {

DatasetSplit split_dataset(std::vector<std::string> subjects, std::uint64_t seed) {
  const std::size_t n = subjects.size();
  if (n < 5) throw DataError("need at least 5 subjects to split, got " + std::to_string(n));
  if (std::set<std::string>(subjects.begin(), subjects.end()).size() != n) {
    throw UsageError("subject ids must be unique");
  }
  std::sort(subjects.begin(), subjects.end());
  Rng rng(seed);
  rng.shuffle(subjects);

  const std::size_t n_train = (7 * n + 5) / 10;
  const std::size_t n_val = (n + 5) / 10;
  DatasetSplit split;
  split.seed = seed;
  const auto first = subjects.begin();
  split.train.assign(first, first + static_cast<long>(n_train));
  split.validation.assign(first + static_cast<long>(n_train), first + static_cast<long>(n_train + n_val));
  split.test.assign(first + static_cast<long>(n_train + n_val), subjects.end());
  for (auto* list : {&split.train, &split.validation, &split.test}) std::sort(list->begin(), list->end());
  return split;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  std::string out = "# seed " + std::to_string(split.seed) + "\n";
  auto section = [&](const char* name, const std::vector<std::string>& ids) {
    out += std::string("[") + name + "]\n";
    for (const auto& id : ids) out += id + "\n";
  };
  section("train", split.train);
  section("val", split.validation);
  section("test", split.test);
  write_text_file_atomic(path, out);
}

DatasetSplit read_split(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  DatasetSplit split;
  std::vector<std::string>* current = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# seed ", 0) == 0) {
      split.seed = std::stoull(line.substr(7));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (line == "[train]") {
      current = &split.train;
    } else if (line == "[val]") {
      current = &split.validation;
    } else if (line == "[test]") {
      current = &split.test;
    } else if (line[0] == '[') {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown section " + line);
    } else {
      if (!current) throw DataError(path.string() + ":" + std::to_string(lineno) + ": id outside a section");
      current->push_back(line);
    }
  }
  return split;
}

}  // namespace csg
