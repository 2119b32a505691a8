#ifndef PCDC_NN_CHECKPOINT_HPP_
#define PCDC_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "pcdc/nn/graph.hpp"

namespace pcdc::nn {

// Layout (little-endian): "PCDCWGT1", u64 config hash, u32 tensor count, then
// per tensor {u16 name length, name, u32 rows, u32 cols, rows*cols f64}.
void save_checkpoint(std::ostream& out, std::uint64_t config_hash,
                     std::span<const Param* const> params);
void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     std::span<const Param* const> params);

// Names, order and shapes must match `params` exactly. Throws kHashMismatch
// when the file was written for a different configuration.
void load_checkpoint(std::istream& in, std::uint64_t config_hash, std::span<Param* const> params);
void load_checkpoint(const std::string& path, std::uint64_t config_hash,
                     std::span<Param* const> params);

// FNV-1a over names, shapes and raw values; what the stream header records.
std::uint64_t weights_hash(std::span<const Param* const> params);

}  // namespace pcdc::nn

#endif  // PCDC_NN_CHECKPOINT_HPP_
