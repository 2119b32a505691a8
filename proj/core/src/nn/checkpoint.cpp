#include "pcdc/nn/checkpoint.hpp"

#include <cstring>
#include <type_traits>
#include <fstream>
#include <istream>
#include <ostream>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc::nn {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'D', 'C', 'W', 'G', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    std::memcpy(&bits, &v, sizeof v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) {
    fail(ErrorCode::kIoError, "checkpoint: truncated file");
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    T v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void save_checkpoint(std::ostream& out, std::uint64_t config_hash,
                     std::span<const Param* const> params) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.flat()) put<double>(out, v);
  }
  if (!out) fail(ErrorCode::kIoError, "checkpoint: write failed");
}

void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     std::span<const Param* const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "checkpoint: cannot open " + path + " for writing");
  save_checkpoint(out, config_hash, params);
}

void load_checkpoint(std::istream& in, std::uint64_t config_hash, std::span<Param* const> params) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    fail(ErrorCode::kIoError, "checkpoint: bad magic (not a weights file)");
  }
  const auto hash = get<std::uint64_t>(in);
  if (hash != config_hash) {
    fail(ErrorCode::kHashMismatch,
         "checkpoint: weights were trained for a different codec configuration");
  }
  const auto count = get<std::uint32_t>(in);
  if (count != params.size()) {
    fail(ErrorCode::kShapeMismatch, "checkpoint: holds " + std::to_string(count) +
                                        " tensors, model has " + std::to_string(params.size()));
  }
  for (Param* p : params) {
    std::string name(get<std::uint16_t>(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      fail(ErrorCode::kIoError, "checkpoint: truncated file");
    }
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      fail(ErrorCode::kShapeMismatch, "checkpoint: tensor '" + name + "' does not match '" +
                                          p->name + "'");
    }
    for (double& v : p->value.flat()) v = get<double>(in);
  }
}

void load_checkpoint(const std::string& path, std::uint64_t config_hash,
                     std::span<Param* const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "checkpoint: cannot open " + path);
  load_checkpoint(in, config_hash, params);
}

std::uint64_t weights_hash(std::span<const Param* const> params) {
  Fnv1a h;
  for (const Param* p : params) {
    h.update(p->name);
    h.update_u64(p->value.rows());
    h.update_u64(p->value.cols());
    for (double v : p->value.flat()) h.update_f64(v);
  }
  return h.digest();
}

}  // namespace pcdc::nn
