// Python bindings for the core operations: file I/O, synthetic degradation,
// partitioning, model construction/inference/training, checkpoints, and the
// evaluation metrics. Arrays cross the boundary as contiguous float32 or
// float64 numpy arrays; shapes follow the C++ API (points are rows).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcar/checkpoint.hpp"
#include "pcar/metrics.hpp"
#include "pcar/model.hpp"
#include "pcar/ply_io.hpp"
#include "pcar/run_config.hpp"
#include "pcar/sampling.hpp"
#include "pcar/training.hpp"

namespace py = pybind11;
using namespace pcar;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor2<float> tensor_from(const FloatArray& a, const char* name,
                           Index want_cols = -1) {
  Index rows = 0, cols = 0;
  if (a.ndim() == 1) {
    rows = static_cast<Index>(a.shape(0));
    cols = 1;
  } else if (a.ndim() == 2) {
    rows = static_cast<Index>(a.shape(0));
    cols = static_cast<Index>(a.shape(1));
  } else {
    throw std::invalid_argument(std::string(name) +
                                ": expected a 1-D or 2-D array");
  }
  if (want_cols >= 0 && cols != want_cols)
    throw std::invalid_argument(std::string(name) + ": expected " +
                                std::to_string(want_cols) + " columns, got " +
                                std::to_string(cols));
  Tensor2<float> t(rows, cols);
  std::memcpy(t.data(), a.data(),
              sizeof(float) * static_cast<std::size_t>(t.size()));
  return t;
}

py::array_t<float> array_from(const Tensor2<float>& t) {
  py::array_t<float> a({static_cast<py::ssize_t>(t.rows()),
                        static_cast<py::ssize_t>(t.cols())});
  std::memcpy(a.mutable_data(), t.data(),
              sizeof(float) * static_cast<std::size_t>(t.size()));
  return a;
}

PointCloud cloud_from(const FloatArray& coords, const FloatArray& attrs,
                      const FloatArray* qsteps) {
  PointCloud cloud;
  cloud.coords = tensor_from(coords, "coords", 3);
  cloud.attrs = tensor_from(attrs, "attrs", 3);
  if (cloud.coords.rows() != cloud.attrs.rows())
    throw std::invalid_argument("coords and attrs row counts differ");
  if (qsteps != nullptr) {
    cloud.qsteps = tensor_from(*qsteps, "qsteps", 1);
    if (cloud.qsteps.rows() != cloud.coords.rows())
      throw std::invalid_argument("qsteps row count differs from coords");
  }
  return cloud;
}

// A float-precision model bundled with the architecture that shaped it.
struct PyModel {
  ModelConfig config;
  ModelParams<float> params;
};

void check_same_config(const PyModel& a, const PyModel& b) {
  if (model_config_to_json(a.config) != model_config_to_json(b.config))
    throw std::invalid_argument("models were built from different configs");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Point cloud color restoration: core operations";

  // ---- configuration ------------------------------------------------------
  py::enum_<LayerKind>(m, "LayerKind")
      .value("cheb", LayerKind::ChebConv)
      .value("attention", LayerKind::Attention);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("tiny", &ModelConfig::tiny)
      .def_readwrite("block_size", &ModelConfig::block_size)
      .def_readwrite("scales", &ModelConfig::scales)
      .def_readwrite("cheb_order", &ModelConfig::cheb_order)
      .def_readwrite("extraction_layout", &ModelConfig::extraction_layout)
      .def_readwrite("feature_width", &ModelConfig::feature_width)
      .def_readwrite("bottleneck_width", &ModelConfig::bottleneck_width)
      .def_readwrite("head_widths", &ModelConfig::head_widths)
      .def_readwrite("rescale_laplacian", &ModelConfig::rescale_laplacian)
      .def_readwrite("joint_yuv", &ModelConfig::joint_yuv)
      .def_readwrite("seed", &ModelConfig::seed)
      .def("validate", &ModelConfig::validate)
      .def("to_json", [](const ModelConfig& c) {
        return model_config_to_json(c);
      })
      .def_static("from_json", &model_config_from_json);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("beta1", &TrainConfig::beta1)
      .def_readwrite("beta2", &TrainConfig::beta2)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_property(
          "component",
          [](const TrainConfig& c) { return std::string(to_string(c.component)); },
          [](TrainConfig& c, const std::string& s) {
            c.component = component_from_string(s);
          })
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("qp_set", &TrainConfig::qp_set)
      .def("validate", &TrainConfig::validate);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("model", &RunConfig::model)
      .def_readwrite("train", &RunConfig::train)
      .def_readwrite("data_dir", &RunConfig::data_dir)
      .def_readwrite("out", &RunConfig::out);
  m.def("parse_run_config", &parse_run_config, py::arg("json_text"));
  m.def("format_run_config", &format_run_config, py::arg("config"));

  // ---- file formats -------------------------------------------------------
  m.def(
      "read_ply",
      [](const std::string& path) {
        const PointCloud cloud = read_ply(path);
        return py::make_tuple(array_from(cloud.coords),
                              array_from(cloud.attrs));
      },
      py::arg("path"), "Returns (coords Nx3 float32, rgb Nx3 float32).");
  m.def(
      "write_ply",
      [](const FloatArray& coords, const FloatArray& rgb,
         const std::string& path, bool binary) {
        write_ply(cloud_from(coords, rgb, nullptr), path, binary);
      },
      py::arg("coords"), py::arg("rgb"), py::arg("path"),
      py::arg("binary") = true);
  m.def(
      "read_qsteps",
      [](const std::string& path, Index n) {
        return array_from(read_qsteps(path, n));
      },
      py::arg("path"), py::arg("n"));
  m.def(
      "write_qsteps",
      [](const FloatArray& qsteps, const std::string& path) {
        write_qsteps(tensor_from(qsteps, "qsteps", 1), path);
      },
      py::arg("qsteps"), py::arg("path"));

  // ---- color space and metrics ---------------------------------------------
  m.def(
      "rgb_to_yuv",
      [](const FloatArray& rgb) {
        return array_from(rgb_to_yuv(tensor_from(rgb, "rgb", 3)));
      },
      py::arg("rgb"));
  m.def(
      "yuv_to_rgb",
      [](const FloatArray& yuv) {
        return array_from(yuv_to_rgb(tensor_from(yuv, "yuv", 3)));
      },
      py::arg("yuv"));
  m.def(
      "psnr",
      [](const FloatArray& a, const FloatArray& b, double peak) {
        return psnr(tensor_from(a, "a"), tensor_from(b, "b"), peak);
      },
      py::arg("a"), py::arg("b"), py::arg("peak") = 255.0);
  m.def("yuv_psnr", &yuv_psnr, py::arg("psnr_y"), py::arg("psnr_u"),
        py::arg("psnr_v"));
  m.def(
      "bd_rate",
      [](const std::vector<std::pair<double, double>>& anchor,
         const std::vector<std::pair<double, double>>& test) {
        auto to_curve = [](const std::vector<std::pair<double, double>>& pts) {
          RdCurve curve;
          for (const auto& [rate, quality] : pts)
            curve.points.push_back({rate, quality});
          return curve;
        };
        return bd_rate(to_curve(anchor), to_curve(test));
      },
      py::arg("anchor"), py::arg("test"),
      "Curves are lists of (rate, psnr) pairs, rates strictly increasing.");
  m.def("qp_step", &qp_step, py::arg("qp"));

  // ---- geometry -------------------------------------------------------------
  m.def(
      "farthest_point_sample",
      [](const FloatArray& coords, Index m_points) {
        const auto t = tensor_from(coords, "coords", 3);
        return farthest_point_sample(t, m_points, lowest_coord_index(t));
      },
      py::arg("coords"), py::arg("m"),
      "Greedy max-min sampling from the lexicographically smallest point.");
  m.def(
      "knn",
      [](const FloatArray& queries, const FloatArray& refs, Index k) {
        const auto result = knn(tensor_from(queries, "queries", 3),
                                tensor_from(refs, "refs", 3), k);
        const py::ssize_t nq =
            static_cast<py::ssize_t>(result.indices.size()) / k;
        py::array_t<Index> idx({nq, static_cast<py::ssize_t>(k)});
        std::memcpy(idx.mutable_data(), result.indices.data(),
                    sizeof(Index) * result.indices.size());
        return idx;
      },
      py::arg("queries"), py::arg("refs"), py::arg("k"));

  // ---- blocks ---------------------------------------------------------------
  py::class_<Block>(m, "Block")
      .def_property_readonly(
          "coords", [](const Block& b) { return array_from(b.cloud.coords); })
      .def_property_readonly(
          "attrs", [](const Block& b) { return array_from(b.cloud.attrs); })
      .def_property_readonly(
          "qsteps", [](const Block& b) { return array_from(b.cloud.qsteps); })
      .def_readonly("source_begin", &Block::source_begin)
      .def_readonly("source_end", &Block::source_end)
      .def_readonly("pad_count", &Block::pad_count);
  m.def(
      "partition",
      [](const FloatArray& coords, const FloatArray& attrs,
         py::object qsteps, Index n) {
        if (qsteps.is_none())
          return partition_blocks(cloud_from(coords, attrs, nullptr), n);
        const FloatArray q = qsteps.cast<FloatArray>();
        return partition_blocks(cloud_from(coords, attrs, &q), n);
      },
      py::arg("coords"), py::arg("attrs"), py::arg("qsteps"), py::arg("n"));
  m.def(
      "combine",
      [](const std::vector<Block>& blocks) {
        const PointCloud cloud = combine_blocks(blocks);
        return py::make_tuple(array_from(cloud.coords),
                              array_from(cloud.attrs),
                              array_from(cloud.qsteps));
      },
      py::arg("blocks"));

  // ---- degradation ------------------------------------------------------------
  m.def(
      "synth_degrade",
      [](const FloatArray& coords, const FloatArray& yuv,
         const std::vector<int>& qp_set, std::uint64_t seed) {
        const DegradeResult result =
            synth_degrade(cloud_from(coords, yuv, nullptr), qp_set, seed);
        return py::make_tuple(array_from(result.degraded.attrs),
                              array_from(result.degraded.qsteps));
      },
      py::arg("coords"), py::arg("yuv"), py::arg("qp_set"), py::arg("seed"),
      "Returns (degraded_yuv Nx3, qsteps Nx1).");

  // ---- model ---------------------------------------------------------------
  py::class_<PyModel>(m, "Model")
      .def_property_readonly("config",
                             [](const PyModel& m_) { return m_.config; })
      .def_property_readonly(
          "param_count",
          [](const PyModel& m_) { return param_count(m_.params); })
      .def(
          "forward",
          [](const PyModel& model, const FloatArray& coords,
             const FloatArray& attrs, const FloatArray& qsteps,
             const std::string& component) {
            Block block;
            block.cloud = cloud_from(coords, attrs, &qsteps);
            block.source_begin = 0;
            block.source_end = block.cloud.size();
            const auto out = forward(block, component_from_string(component),
                                     model.params, model.config);
            return array_from(out);
          },
          py::arg("coords"), py::arg("attrs"), py::arg("qsteps"),
          py::arg("component") = "Y",
          "Restored component values in [0,1] for one block (attrs must "
          "be pre-scaled to [0,1]).");

  m.def(
      "build_model",
      [](const ModelConfig& config) {
        return PyModel{config, build_model<float>(config)};
      },
      py::arg("config"));

  m.def(
      "train",
      [](PyModel& model, const FloatArray& coords, const FloatArray& clean_yuv,
         const FloatArray& degraded_yuv, const FloatArray& qsteps,
         const TrainConfig& tc) {
        const PointCloud clean = cloud_from(coords, clean_yuv, nullptr);
        const PointCloud degraded = cloud_from(coords, degraded_yuv, &qsteps);
        const auto samples =
            make_train_samples(clean, degraded, tc.component, model.config);
        return train(samples, model.params, model.config, tc);
      },
      py::arg("model"), py::arg("coords"), py::arg("clean_yuv"),
      py::arg("degraded_yuv"), py::arg("qsteps"), py::arg("train_config"),
      "Mini-batch Adam on aligned clean/degraded clouds (YUV, [0,255]); "
      "returns the mean per-sample loss of each epoch.");

  m.def(
      "restore",
      [](const FloatArray& coords, const FloatArray& rgb,
         const FloatArray& qsteps, const std::vector<PyModel*>& models) {
        if (models.empty()) throw std::invalid_argument("no models given");
        for (const PyModel* model : models)
          check_same_config(*models[0], *model);
        std::vector<const ModelParams<float>*> ptrs;
        for (const PyModel* model : models) ptrs.push_back(&model->params);
        const PointCloud cloud = cloud_from(coords, rgb, &qsteps);
        const PointCloud restored =
            restore_cloud<float>(cloud, ptrs, models[0]->config);
        return array_from(restored.attrs);
      },
      py::arg("coords"), py::arg("rgb"), py::arg("qsteps"), py::arg("models"),
      "Restore a full RGB cloud. Pass [y, u, v] models, or [joint].");

  m.def(
      "gradient_check",
      [](const ModelConfig& config, const FloatArray& coords,
         const FloatArray& clean_yuv, const FloatArray& degraded_yuv,
         const FloatArray& qsteps, double step, Index per_kind,
         std::uint64_t seed) {
        const PointCloud clean = cloud_from(coords, clean_yuv, nullptr);
        const PointCloud degraded = cloud_from(coords, degraded_yuv, &qsteps);
        const auto samples =
            make_train_samples(clean, degraded, Component::Y, config);
        const auto model = build_model<double>(config);
        return gradient_check(model, samples.at(0), config, step, per_kind,
                              seed);
      },
      py::arg("config"), py::arg("coords"), py::arg("clean_yuv"),
      py::arg("degraded_yuv"), py::arg("qsteps"), py::arg("step") = 1e-4,
      py::arg("per_kind") = 3, py::arg("seed") = 7,
      "Max relative error between reverse-mode and finite-difference "
      "gradients on the first block of the given pair.");

  // ---- checkpoints -----------------------------------------------------------
  m.def(
      "save_checkpoint",
      [](const PyModel& model, const std::string& path,
         const std::string& component, int qp) {
        Checkpoint ckpt;
        ckpt.component = component_from_string(component);
        ckpt.qp = qp;
        ckpt.config = model.config;
        ckpt.params = model.params;
        save_checkpoint(ckpt, path);
      },
      py::arg("model"), py::arg("path"), py::arg("component") = "Y",
      py::arg("qp") = 0);
  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        Checkpoint ckpt = load_checkpoint(path);
        PyModel model{ckpt.config, std::move(ckpt.params)};
        return py::make_tuple(std::move(model),
                              std::string(to_string(ckpt.component)),
                              ckpt.qp);
      },
      py::arg("path"), "Returns (model, component, qp).");
}
