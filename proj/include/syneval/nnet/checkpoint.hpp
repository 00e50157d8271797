#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "syneval/errors.hpp"
#include "syneval/nnet/graph.hpp"

namespace syneval::nnet {

// Self-describing binary container: magic, format version, architecture tag,
// config JSON, then named little-endian float32 blocks in Eigen column-major
// order. Reloading restores parameters bit-exactly for float models.
inline constexpr char kCheckpointMagic[8] = {'S', 'Y', 'N', 'L', 'M', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  std::uint32_t v = 0;
  std::memcpy(&v, buf, 4);
  return v;
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::string& path, const std::string& arch,
                     const std::string& config_json, const ParamStore<Scalar>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  detail::write_u32(out, kCheckpointVersion);
  detail::write_str(out, arch);
  detail::write_str(out, config_json);
  detail::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& slot : params.slots()) {
    detail::write_str(out, slot.name);
    detail::write_u32(out, static_cast<std::uint32_t>(slot.value.rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(slot.value.cols()));
    const Mat<float> m = slot.value.template cast<float>();
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

struct LoadedCheckpoint {
  std::string arch;
  std::string config_json;
  std::vector<std::pair<std::string, Mat<float>>> tensors;
};

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  if (detail::read_u32(in) != kCheckpointVersion)
    throw IoError("unsupported checkpoint version: " + path);
  LoadedCheckpoint ck;
  ck.arch = detail::read_str(in);
  ck.config_json = detail::read_str(in);
  const std::uint32_t n = detail::read_u32(in);
  ck.tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = detail::read_str(in);
    const std::uint32_t rows = detail::read_u32(in);
    const std::uint32_t cols = detail::read_u32(in);
    Mat<float> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ck;
}

// Fills an allocated store by name; every slot must be present with matching
// shape so an architecture mismatch fails loudly.
template <typename Scalar>
void fill_params(ParamStore<Scalar>& params, const LoadedCheckpoint& ck) {
  for (auto& slot : params.slots()) {
    bool found = false;
    for (const auto& [name, tensor] : ck.tensors) {
      if (name != slot.name) continue;
      if (tensor.rows() != slot.value.rows() || tensor.cols() != slot.value.cols())
        throw IoError("checkpoint tensor shape mismatch for " + name);
      slot.value = tensor.template cast<Scalar>();
      found = true;
      break;
    }
    if (!found) throw IoError("checkpoint missing tensor " + slot.name);
  }
}

}  // namespace syneval::nnet
