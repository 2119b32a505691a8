#ifndef PCDC_PLY_HPP_
#define PCDC_PLY_HPP_

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pcdc/geometry.hpp"

namespace pcdc::ply {

enum class Format { kAscii, kBinaryLittleEndian };

// Reads the x/y/z properties of the vertex element. Other vertex properties
// are skipped. Supports ascii and binary_little_endian files with scalar
// properties of any standard type.
std::vector<std::array<double, 3>> read_points(const std::filesystem::path& path);
std::vector<std::array<double, 3>> read_points(std::istream& in);

void write_coords(const std::filesystem::path& path, const std::vector<Coord>& coords,
                  Format format = Format::kBinaryLittleEndian);
void write_coords(std::ostream& out, const std::vector<Coord>& coords, Format format);

}  // namespace pcdc::ply

#endif  // PCDC_PLY_HPP_
