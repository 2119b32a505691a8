#include "pcdc/ply.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc::ply {

namespace {

enum class Scalar { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

Scalar parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::kI8;
  if (name == "uchar" || name == "uint8") return Scalar::kU8;
  if (name == "short" || name == "int16") return Scalar::kI16;
  if (name == "ushort" || name == "uint16") return Scalar::kU16;
  if (name == "int" || name == "int32") return Scalar::kI32;
  if (name == "uint" || name == "uint32") return Scalar::kU32;
  if (name == "float" || name == "float32") return Scalar::kF32;
  if (name == "double" || name == "float64") return Scalar::kF64;
  fail(ErrorCode::kIoError, "ply: unknown property type '" + name + "'");
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kI8:
    case Scalar::kU8: return 1;
    case Scalar::kI16:
    case Scalar::kU16: return 2;
    case Scalar::kI32:
    case Scalar::kU32:
    case Scalar::kF32: return 4;
    case Scalar::kF64: return 8;
  }
  return 0;
}

double decode_le(Scalar s, const unsigned char* p) {
  std::uint64_t bits = 0;
  const std::size_t n = scalar_size(s);
  for (std::size_t i = 0; i < n; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  switch (s) {
    case Scalar::kI8: return static_cast<std::int8_t>(bits);
    case Scalar::kU8: return static_cast<std::uint8_t>(bits);
    case Scalar::kI16: return static_cast<std::int16_t>(bits);
    case Scalar::kU16: return static_cast<std::uint16_t>(bits);
    case Scalar::kI32: return static_cast<std::int32_t>(bits);
    case Scalar::kU32: return static_cast<std::uint32_t>(bits);
    case Scalar::kF32: {
      const auto u = static_cast<std::uint32_t>(bits);
      float f;
      std::memcpy(&f, &u, 4);
      return f;
    }
    case Scalar::kF64: {
      double d;
      std::memcpy(&d, &bits, 8);
      return d;
    }
  }
  return 0.0;
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::pair<std::string, Scalar>> props;
  std::size_t stride() const {
    std::size_t s = 0;
    for (const auto& p : props) s += scalar_size(p.second);
    return s;
  }
};

}  // namespace

std::vector<std::array<double, 3>> read_points(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    fail(ErrorCode::kIoError, "ply: missing 'ply' magic");
  }
  bool binary = false;
  std::vector<Element> elements;
  while (true) {
    if (!std::getline(in, line)) fail(ErrorCode::kIoError, "ply: unterminated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        fail(ErrorCode::kIoError, "ply: unsupported format '" + fmt + "'");
      }
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) fail(ErrorCode::kIoError, "ply: property before element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        if (elements.back().name == "vertex") {
          fail(ErrorCode::kIoError, "ply: list properties on vertex are not supported");
        }
        elements.back().props.emplace_back("<list>", Scalar::kU8);
        continue;
      }
      ls >> name;
      elements.back().props.emplace_back(name, parse_scalar(type));
    }
  }

  std::vector<std::array<double, 3>> points;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      // Only elements before the vertex block would need skipping; faces and
      // the like conventionally follow it.
      if (points.empty() && e.count > 0) {
        fail(ErrorCode::kIoError, "ply: element '" + e.name + "' precedes vertex data");
      }
      continue;
    }
    int axis_prop[3] = {-1, -1, -1};
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      const auto& n = e.props[i].first;
      if (n == "x") axis_prop[0] = static_cast<int>(i);
      if (n == "y") axis_prop[1] = static_cast<int>(i);
      if (n == "z") axis_prop[2] = static_cast<int>(i);
    }
    for (int a : axis_prop) {
      if (a < 0) fail(ErrorCode::kIoError, "ply: vertex element lacks x/y/z");
    }
    points.resize(e.count);
    if (binary) {
      const std::size_t stride = e.stride();
      std::vector<std::size_t> offset(e.props.size());
      for (std::size_t i = 1; i < e.props.size(); ++i) {
        offset[i] = offset[i - 1] + scalar_size(e.props[i - 1].second);
      }
      std::vector<unsigned char> buf(stride);
      for (std::size_t v = 0; v < e.count; ++v) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(stride))) {
          fail(ErrorCode::kIoError, "ply: truncated binary vertex data");
        }
        for (int a = 0; a < 3; ++a) {
          const auto p = static_cast<std::size_t>(axis_prop[a]);
          points[v][static_cast<std::size_t>(a)] = decode_le(e.props[p].second, &buf[offset[p]]);
        }
      }
    } else {
      std::vector<double> vals(e.props.size());
      for (std::size_t v = 0; v < e.count; ++v) {
        for (double& x : vals) {
          if (!(in >> x)) fail(ErrorCode::kIoError, "ply: truncated ascii vertex data");
        }
        for (int a = 0; a < 3; ++a) {
          points[v][static_cast<std::size_t>(a)] = vals[static_cast<std::size_t>(axis_prop[a])];
        }
      }
    }
    break;
  }
  return points;
}

std::vector<std::array<double, 3>> read_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return read_points(in);
}

void write_coords(std::ostream& out, const std::vector<Coord>& coords, Format format) {
  out << "ply\n"
      << (format == Format::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << coords.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\nend_header\n";
  if (format == Format::kAscii) {
    for (const Coord& c : coords) out << c.x << ' ' << c.y << ' ' << c.z << '\n';
    return;
  }
  for (const Coord& c : coords) {
    for (std::int32_t v : {c.x, c.y, c.z}) {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                         static_cast<char>((u >> 16) & 0xff), static_cast<char>(u >> 24)};
      out.write(b, 4);
    }
  }
}

void write_coords(const std::filesystem::path& path, const std::vector<Coord>& coords,
                  Format format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  write_coords(out, coords, format);
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace pcdc::ply
