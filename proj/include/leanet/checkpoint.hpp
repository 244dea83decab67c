#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace leanet {

struct CheckpointEntry {
  std::vector<int> extents;
  std::vector<float> data;
};

// Named float blobs plus a free-form JSON metadata string, (de)serialized to
// a little-endian binary container. Entry order is preserved, so writing the
// same entries in the same order yields byte-identical files.
struct Checkpoint {
  std::string metadata_json = "{}";
  std::vector<std::pair<std::string, CheckpointEntry>> entries;

  void add(std::string name, std::vector<int> extents, std::vector<float> data);
  const CheckpointEntry* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace leanet
