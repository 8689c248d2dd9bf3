#include "pcar/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

namespace pcar {
namespace {

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::I8:
    case ScalarType::U8:
      return 1;
    case ScalarType::I16:
    case ScalarType::U16:
      return 2;
    case ScalarType::I32:
    case ScalarType::U32:
    case ScalarType::F32:
      return 4;
    case ScalarType::F64:
      return 8;
  }
  return 0;
}

ScalarType parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return ScalarType::I8;
  if (s == "uchar" || s == "uint8") return ScalarType::U8;
  if (s == "short" || s == "int16") return ScalarType::I16;
  if (s == "ushort" || s == "uint16") return ScalarType::U16;
  if (s == "int" || s == "int32") return ScalarType::I32;
  if (s == "uint" || s == "uint32") return ScalarType::U32;
  if (s == "float" || s == "float32") return ScalarType::F32;
  if (s == "double" || s == "float64") return ScalarType::F64;
  throw PlyMalformedHeader("ply: unknown property type '" + s + "'");
}

struct Property {
  std::string name;
  bool is_list = false;
  ScalarType count_type = ScalarType::U8;
  ScalarType value_type = ScalarType::F32;
};

struct Element {
  std::string name;
  Index count = 0;
  std::vector<Property> props;
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
};

Header parse_header(std::istream& in, const std::string& path) {
  auto next_line = [&](std::string& line) {
    if (!std::getline(in, line))
      throw PlyMalformedHeader("ply: unterminated header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  std::string line;
  next_line(line);
  if (line != "ply")
    throw PlyMalformedHeader("ply: missing 'ply' magic in " + path);

  Header header;
  bool have_format = false;
  while (true) {
    next_line(line);
    std::istringstream ls(line);
    std::string keyword;
    if (!(ls >> keyword) || keyword == "comment" || keyword == "obj_info")
      continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt, version;
      if (!(ls >> fmt >> version) || version != "1.0")
        throw PlyMalformedHeader("ply: bad format line '" + line + "'");
      if (fmt == "ascii")
        header.binary = false;
      else if (fmt == "binary_little_endian")
        header.binary = true;
      else
        throw PlyMalformedHeader("ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      if (!(ls >> e.name >> e.count) || e.count < 0)
        throw PlyMalformedHeader("ply: bad element line '" + line + "'");
      header.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (header.elements.empty())
        throw PlyMalformedHeader("ply: property before any element");
      std::string first;
      if (!(ls >> first))
        throw PlyMalformedHeader("ply: bad property line '" + line + "'");
      Property p;
      if (first == "list") {
        std::string count_t, value_t;
        if (!(ls >> count_t >> value_t >> p.name))
          throw PlyMalformedHeader("ply: bad list property '" + line + "'");
        p.is_list = true;
        p.count_type = parse_type(count_t);
        p.value_type = parse_type(value_t);
      } else {
        if (!(ls >> p.name))
          throw PlyMalformedHeader("ply: bad property line '" + line + "'");
        p.value_type = parse_type(first);
      }
      header.elements.back().props.push_back(std::move(p));
    } else {
      throw PlyMalformedHeader("ply: unknown header keyword '" + keyword +
                               "'");
    }
  }
  if (!have_format)
    throw PlyMalformedHeader("ply: header has no format line in " + path);
  return header;
}

// Pull scalars out of either body representation through one interface.
class AsciiBody {
 public:
  explicit AsciiBody(std::istream& in) : in_(in) {}
  double scalar(ScalarType) {
    double v;
    if (!(in_ >> v)) throw PlyTruncated("ply: body ended early (ascii)");
    return v;
  }

 private:
  std::istream& in_;
};

class BinaryBody {
 public:
  explicit BinaryBody(std::istream& in) {
    buffer_.assign(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>());
    pos_ = 0;
  }

  double scalar(ScalarType t) {
    const std::size_t n = type_size(t);
    if (pos_ + n > buffer_.size())
      throw PlyTruncated("ply: body ended early (binary)");
    const char* p = buffer_.data() + pos_;
    pos_ += n;
    switch (t) {
      case ScalarType::I8:
        return static_cast<double>(static_cast<std::int8_t>(*p));
      case ScalarType::U8:
        return static_cast<double>(static_cast<std::uint8_t>(*p));
      case ScalarType::I16: {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      case ScalarType::U16: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
      }
      case ScalarType::I32: {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      case ScalarType::U32: {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
      }
      case ScalarType::F32: {
        float v;
        std::memcpy(&v, p, 4);
        return v;
      }
      case ScalarType::F64: {
        double v;
        std::memcpy(&v, p, 8);
        return v;
      }
    }
    return 0.0;
  }

 private:
  std::vector<char> buffer_;
  std::size_t pos_ = 0;
};

// Reads every element in file order, keeping only the six vertex fields.
template <typename Body>
PointCloud read_body(Body& body, const Header& header) {
  PointCloud cloud;
  for (const Element& e : header.elements) {
    const bool is_vertex = e.name == "vertex";
    // Map the six wanted properties to column slots: 0..2 coords, 3..5 rgb.
    std::vector<int> slot(e.props.size(), -1);
    if (is_vertex) {
      const char* wanted[6] = {"x", "y", "z", "red", "green", "blue"};
      for (int w = 0; w < 6; ++w) {
        bool found = false;
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          if (e.props[i].name == wanted[w] && !e.props[i].is_list) {
            slot[i] = w;
            found = true;
            break;
          }
        }
        if (!found)
          throw PlyMissingProperty(std::string("ply: vertex element lacks '") +
                                   wanted[w] + "'");
      }
      cloud.coords = Tensor2<float>(e.count, 3);
      cloud.attrs = Tensor2<float>(e.count, 3);
    }
    for (Index i = 0; i < e.count; ++i) {
      for (std::size_t p = 0; p < e.props.size(); ++p) {
        const Property& prop = e.props[p];
        if (prop.is_list) {
          const double raw_count = body.scalar(prop.count_type);
          const auto list_count = static_cast<Index>(raw_count);
          if (list_count < 0)
            throw PlyTruncated("ply: negative list count");
          for (Index j = 0; j < list_count; ++j) body.scalar(prop.value_type);
          continue;
        }
        const double v = body.scalar(prop.value_type);
        if (slot[p] < 0) continue;
        if (slot[p] < 3)
          cloud.coords(i, slot[p]) = static_cast<float>(v);
        else
          cloud.attrs(i, slot[p] - 3) = static_cast<float>(v);
      }
    }
  }
  return cloud;
}

}  // namespace

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError("ply: cannot open " + path);
  const Header header = parse_header(in, path);

  bool has_vertex = false;
  for (const Element& e : header.elements)
    has_vertex = has_vertex || e.name == "vertex";
  if (!has_vertex)
    throw PlyMissingProperty("ply: file has no vertex element: " + path);

  PointCloud cloud;
  if (header.binary) {
    BinaryBody body(in);
    cloud = read_body(body, header);
  } else {
    AsciiBody body(in);
    cloud = read_body(body, header);
  }
  cloud.validate();
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, bool binary) {
  cloud.validate();
  if (cloud.attrs.cols() != 3)
    throw std::invalid_argument("write_ply: attributes must have 3 channels");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlyError("ply: cannot open " + path + " for writing");

  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "end_header\n";

  auto to_byte = [](float v) {
    const double r = std::round(static_cast<double>(v));
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
  };

  if (binary) {
    for (Index i = 0; i < cloud.size(); ++i) {
      float xyz[3] = {cloud.coords(i, 0), cloud.coords(i, 1),
                      cloud.coords(i, 2)};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      std::uint8_t rgb[3] = {to_byte(cloud.attrs(i, 0)),
                             to_byte(cloud.attrs(i, 1)),
                             to_byte(cloud.attrs(i, 2))};
      out.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
    }
  } else {
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (Index i = 0; i < cloud.size(); ++i) {
      out << cloud.coords(i, 0) << ' ' << cloud.coords(i, 1) << ' '
          << cloud.coords(i, 2) << ' ' << int(to_byte(cloud.attrs(i, 0)))
          << ' ' << int(to_byte(cloud.attrs(i, 1))) << ' '
          << int(to_byte(cloud.attrs(i, 2))) << '\n';
    }
  }
  if (!out) throw PlyError("ply: write failed for " + path);
}

Tensor2<float> read_qsteps(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("qsteps: cannot open " + path);

  Tensor2<float> qsteps(n, 1);
  Index count = 0;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    double v;
    if (!(ls >> v)) {
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      throw std::runtime_error("qsteps: malformed value at line " +
                               std::to_string(line_no) + " of " + path);
    }
    std::string trailing;
    if (ls >> trailing)
      throw std::runtime_error("qsteps: extra tokens at line " +
                               std::to_string(line_no) + " of " + path);
    if (!(v > 0.0))
      throw std::runtime_error("qsteps: non-positive value at line " +
                               std::to_string(line_no) + " of " + path);
    if (count >= n)
      throw std::runtime_error("qsteps: more than " + std::to_string(n) +
                               " values in " + path);
    qsteps(count++, 0) = static_cast<float>(v);
  }
  if (count != n)
    throw std::runtime_error("qsteps: expected " + std::to_string(n) +
                             " values, found " + std::to_string(count) +
                             " in " + path);
  return qsteps;
}

void write_qsteps(const Tensor2<float>& qsteps, const std::string& path) {
  if (qsteps.cols() != 1)
    throw std::invalid_argument("write_qsteps: expected an n x 1 tensor");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("qsteps: cannot open " + path);
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (Index i = 0; i < qsteps.rows(); ++i) out << qsteps(i, 0) << '\n';
  if (!out) throw std::runtime_error("qsteps: write failed for " + path);
}

}  // namespace pcar
