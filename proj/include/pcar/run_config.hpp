#pragma once

#include <string>

#include "pcar/training.hpp"

namespace pcar {

// A complete run description: architecture, optimization, and file paths.
// Serialized as a JSON document with three optional objects:
//
//   {
//     "model": { "block_size": 2048, "scales": [2048, 1024, 512],
//                "cheb_order": 3,
//                "extraction_layout": ["cheb", "attention", "cheb",
//                                      "attention"],
//                "feature_width": 64, "bottleneck_width": 64,
//                "head_widths": [512, 256, 128, 64, 1],
//                "rescale_laplacian": false, "joint_yuv": false, "seed": 1 },
//     "train": { "lr": 1e-5, "beta1": 0.9, "beta2": 0.999, "batch_size": 8,
//                "epochs": 1, "component": "Y", "seed": 1,
//                "qp_set": [51, 46, 40, 34] },
//     "paths": { "data_dir": "", "out": "" }
//   }
//
// Every key is optional and defaults to the values above; unknown keys are
// rejected with an error naming the key. Command-line flags override file
// values.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir;
  std::string out;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& config);

// ModelConfig alone as a JSON object (used inside checkpoints).
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace pcar
