#pragma once

#include <stdexcept>
#include <string>

#include "pcar/point_cloud.hpp"

namespace pcar {

// Distinct error kinds for the documented PLY failure modes.
struct PlyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Header is not valid PLY (bad magic, unknown keyword, unsupported format).
struct PlyMalformedHeader : PlyError {
  using PlyError::PlyError;
};
// Header parses but lacks a vertex element or one of x,y,z,red,green,blue.
struct PlyMissingProperty : PlyError {
  using PlyError::PlyError;
};
// Body ends before every declared element instance was read.
struct PlyTruncated : PlyError {
  using PlyError::PlyError;
};

// Reads an ASCII or binary_little_endian PLY file. Requires a vertex element
// with x,y,z and red,green,blue properties; any numeric property type is
// accepted and cast. Extra properties (normals, alpha, list properties) and
// extra elements (faces, ...) are skipped. qsteps are left empty — they live
// in a sidecar file (see read_qsteps).
PointCloud read_ply(const std::string& path);

// Writes coordinates as float32 x,y,z and colors as uint8 red,green,blue
// (attribute values are rounded and clamped to [0,255]). Reading the file
// back reproduces coordinates bitwise and colors exactly when they were
// integral.
void write_ply(const PointCloud& cloud, const std::string& path,
               bool binary = true);

// Quantization-step sidecar: plain text, one positive decimal per line, in
// point order. Read checks the line count against n and rejects non-positive
// or malformed values.
Tensor2<float> read_qsteps(const std::string& path, Index n);
void write_qsteps(const Tensor2<float>& qsteps, const std::string& path);

}  // namespace pcar
