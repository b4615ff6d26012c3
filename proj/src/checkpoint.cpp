#include "c2f/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace c2f {

namespace {

constexpr char kMagic[8] = {'C', '2', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::uint64_t fingerprint, const nn::NamedParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u64(os, fingerprint);
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  Checkpoint ck;
  ck.fingerprint = read_u64(is);
  const std::uint32_t count = read_u32(is);
  ck.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    const std::uint32_t name_len = read_u32(is);
    rec.name.resize(name_len);
    is.read(rec.name.data(), name_len);
    const std::uint32_t ndim = read_u32(is);
    rec.shape.resize(ndim);
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      rec.shape[d] = static_cast<int>(read_u32(is));
      n *= rec.shape[d];
    }
    rec.values.resize(static_cast<std::size_t>(n));
    is.read(reinterpret_cast<char*>(rec.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("truncated checkpoint: " + path.string());
    ck.records.push_back(std::move(rec));
  }
  return ck;
}

void load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint,
                     const nn::NamedParams& params) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.fingerprint != expected_fingerprint) {
    throw std::runtime_error("checkpoint fingerprint mismatch for " + path.string() +
                             ": file has " + std::to_string(ck.fingerprint) + ", expected " +
                             std::to_string(expected_fingerprint));
  }
  if (ck.records.size() != params.size()) {
    throw std::runtime_error("checkpoint record count " + std::to_string(ck.records.size()) +
                             " does not match model parameter count " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const CheckpointRecord& rec = ck.records[i];
    const auto& [name, t] = params[i];
    if (rec.name != name) {
      throw std::runtime_error("checkpoint record '" + rec.name + "' does not match parameter '" + name + "'");
    }
    if (rec.shape != t.shape()) {
      throw std::runtime_error("checkpoint shape " + shape_str(rec.shape) + " does not match parameter '" + name +
                               "' shape " + shape_str(t.shape()));
    }
    Tensor dst = t;
    std::copy(rec.values.begin(), rec.values.end(), dst.data());
  }
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file for hashing: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (is) {
    is.read(buf, sizeof buf);
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace c2f
