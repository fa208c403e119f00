// Binary parameter container: a JSON manifest (architecture and training
// metadata) followed by named raw-double tensors. Loads validate every
// shape against the receiving ParamSet.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "xling/nn.hpp"

namespace xling {

constexpr char kCheckpointMagic[8] = {'X', 'L', 'N', 'C', '0', '0', '0', '1'};

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = char((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_str(std::istream& is) {
  std::string s(read_u64(is), '\0');
  if (!is.read(s.data(), std::streamsize(s.size())))
    throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const ParamSet& params,
                            const nlohmann::json& manifest) {
  os.write(kCheckpointMagic, 8);
  detail::write_str(os, manifest.dump());
  detail::write_u64(os, params.size());
  for (const auto& e : params.entries()) {
    detail::write_str(os, e.name);
    detail::write_u64(os, e.value.rows());
    detail::write_u64(os, e.value.cols());
    for (double v : e.value.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::write_u64(os, bits);
    }
  }
}

// reads the manifest and fills `params` in place; every stored tensor must
// match an existing entry by name and shape
inline nlohmann::json load_checkpoint(std::istream& is, ParamSet& params) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  nlohmann::json manifest = nlohmann::json::parse(detail::read_str(is));
  std::uint64_t count = detail::read_u64(is);
  if (count != params.size())
    throw std::runtime_error("checkpoint: has " + std::to_string(count) +
                             " tensors, model expects " +
                             std::to_string(params.size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = detail::read_str(is);
    if (!params.has(name))
      throw std::runtime_error("checkpoint: unknown tensor " + name);
    auto& e = params.by_name(name);
    std::uint64_t r = detail::read_u64(is), c = detail::read_u64(is);
    if (r != e.value.rows() || c != e.value.cols())
      throw std::runtime_error("checkpoint: " + name + " is " +
                               std::to_string(r) + "x" + std::to_string(c) +
                               ", model expects " + e.value.shape_str());
    for (double& v : e.value.values) {
      std::uint64_t bits = detail::read_u64(is);
      std::memcpy(&v, &bits, 8);
    }
  }
  return manifest;
}

// reads only the manifest (shape checks without loading weights)
inline nlohmann::json peek_manifest(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  return nlohmann::json::parse(detail::read_str(is));
}

// FNV-1a, used for config and checkpoint identity in run manifests
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(data)));
  return buf;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return hash_hex(data);
}

}  // namespace xling
