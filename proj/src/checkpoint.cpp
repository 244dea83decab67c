#include "leanet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace leanet {

namespace {

constexpr char kMagic[8] = {'L', 'E', 'A', 'N', 'E', 'T', '0', '1'};

void put_u32(std::string& buf, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  buf.append(b, 4);
}

void put_f32(std::string& buf, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(buf, v);
}

struct Reader {
  const std::string& buf;
  size_t at = 0;
  const std::string& path;

  void need(size_t n, const char* what) {
    if (at + n > buf.size())
      throw std::runtime_error("checkpoint " + path + ": truncated while reading " + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data() + at);
    at += 4;
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
  }
  float f32(const char* what) {
    const uint32_t v = u32(what);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace

void Checkpoint::add(std::string name, std::vector<int> extents, std::vector<float> data) {
  size_t expect = 1;
  for (int e : extents) {
    if (e <= 0) throw std::runtime_error("checkpoint entry " + name + ": non-positive extent");
    expect *= size_t(e);
  }
  if (extents.empty()) expect = data.size();  // rank-0 allowed for raw blobs
  if (!extents.empty() && expect != data.size())
    throw std::runtime_error("checkpoint entry " + name + ": extents disagree with payload size");
  entries.emplace_back(std::move(name), CheckpointEntry{std::move(extents), std::move(data)});
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, e] : entries)
    if (n == name) return &e;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string buf;
  buf.reserve(64);
  buf.append(kMagic, 8);
  put_u32(buf, uint32_t(ck.metadata_json.size()));
  buf += ck.metadata_json;
  put_u32(buf, uint32_t(ck.entries.size()));
  for (const auto& [name, e] : ck.entries) {
    put_u32(buf, uint32_t(name.size()));
    buf += name;
    put_u32(buf, uint32_t(e.extents.size()));
    for (int ext : e.extents) put_u32(buf, uint32_t(ext));
    for (float f : e.data) put_f32(buf, f);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};
  if (r.bytes(8, "magic") != std::string(kMagic, 8))
    throw std::runtime_error("checkpoint " + path + ": bad magic");
  Checkpoint ck;
  const uint32_t meta_len = r.u32("metadata length");
  ck.metadata_json = r.bytes(meta_len, "metadata");
  const uint32_t count = r.u32("entry count");
  ck.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("entry name length");
    std::string name = r.bytes(name_len, "entry name");
    const uint32_t rank = r.u32("entry rank");
    if (rank > 8) throw std::runtime_error("checkpoint " + path + ": implausible rank for " + name);
    CheckpointEntry e;
    size_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t ext = r.u32("entry extent");
      e.extents.push_back(int(ext));
      total *= ext;
    }
    e.data.resize(total);
    for (size_t j = 0; j < total; ++j) e.data[j] = r.f32("entry payload");
    ck.entries.emplace_back(std::move(name), std::move(e));
  }
  if (r.at != buf.size())
    throw std::runtime_error("checkpoint " + path + ": trailing bytes after last entry");
  return ck;
}

}  // namespace leanet
