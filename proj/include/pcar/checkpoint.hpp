#pragma once

#include <string>

#include "pcar/model.hpp"

namespace pcar {

// Single-file binary model snapshot. Layout (all little-endian):
//   bytes 0..7   magic "PCARCKPT"
//   u32          format version (currently 1)
//   u8           component tag: 0=Y, 1=U, 2=V, 3=joint YUV
//   i32          training QP tag (0 = unspecified / mixed set)
//   u64 + bytes  model configuration as a JSON object
//   u64          parameter array count, then per array:
//                  u32 + bytes  canonical parameter name
//                  u32, u32     rows, cols
//                  rows*cols    float32 values, row-major
// Round trips are bitwise-lossless for the parameters.
struct Checkpoint {
  Component component = Component::Y;  // ignored when config.joint_yuv
  int qp = 0;
  ModelConfig config;
  ModelParams<float> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Rejects bad magic, unrecognized versions, truncated or trailing data, and
// parameter arrays that do not reconstruct a model of the embedded
// configuration.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcar
