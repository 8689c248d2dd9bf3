// pcar: training, inference, and evaluation tools for point-cloud color
// restoration. Run `pcar --help` or `pcar <command> --help` for usage.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcar/checkpoint.hpp"
#include "pcar/metrics.hpp"
#include "pcar/ply_io.hpp"
#include "pcar/rng.hpp"
#include "pcar/run_config.hpp"
#include "pcar/training.hpp"

namespace fs = std::filesystem;
using namespace pcar;

namespace {

PointCloud load_cloud_yuv(const std::string& path) {
  PointCloud cloud = read_ply(path);
  cloud.attrs = rgb_to_yuv(cloud.attrs);
  return cloud;
}

std::vector<std::string> list_ply_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ply")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no .ply files in " + dir);
  return files;
}

Tensor2<float> column(const Tensor2<float>& t, Index c) {
  Tensor2<float> out(t.rows(), 1);
  for (Index i = 0; i < t.rows(); ++i) out(i, 0) = t(i, c);
  return out;
}

// ---- synth ------------------------------------------------------------------

int run_synth(const std::string& in, int qp, std::uint64_t seed,
              const std::string& out, const std::string& qsteps_out,
              bool ascii) {
  PointCloud clean = load_cloud_yuv(in);
  DegradeResult degraded = synth_degrade(clean, {qp}, seed);
  degraded.degraded.attrs = yuv_to_rgb(degraded.degraded.attrs);
  write_ply(degraded.degraded, out, !ascii);
  write_qsteps(degraded.degraded.qsteps, qsteps_out);
  std::cout << "wrote " << out << " (" << degraded.degraded.size()
            << " points, QP " << qp << ", step " << qp_step(qp) << ") and "
            << qsteps_out << "\n";
  return 0;
}

// ---- partition --------------------------------------------------------------

int run_partition(const std::string& in, Index block_size,
                  const std::string& out_dir, const std::string& qsteps_in,
                  bool ascii) {
  PointCloud cloud = read_ply(in);
  if (!qsteps_in.empty())
    cloud.qsteps = read_qsteps(qsteps_in, cloud.size());

  fs::create_directories(out_dir);
  const std::vector<Block> blocks = partition_blocks(cloud, block_size);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::ostringstream name;
    name << "block_" << std::setw(5) << std::setfill('0') << i;
    const fs::path base = fs::path(out_dir) / name.str();
    write_ply(blocks[i].cloud, base.string() + ".ply", !ascii);
    if (blocks[i].cloud.has_qsteps())
      write_qsteps(blocks[i].cloud.qsteps, base.string() + ".qsteps");
  }
  std::cout << "wrote " << blocks.size() << " blocks of " << block_size
            << " points to " << out_dir << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

int run_train(RunConfig cfg, const std::string& qp_tag) {
  cfg.validate();
  if (cfg.data_dir.empty())
    throw std::runtime_error("train: no data directory (set --data-dir or "
                             "paths.data_dir)");
  if (cfg.out.empty())
    throw std::runtime_error("train: no output path (set --out or paths.out)");

  std::vector<TrainSample> samples;
  std::uint64_t file_index = 0;
  for (const std::string& path : list_ply_files(cfg.data_dir)) {
    PointCloud clean = load_cloud_yuv(path);
    DegradeResult degraded =
        synth_degrade(clean, cfg.train.qp_set, cfg.train.seed + file_index++);
    std::vector<TrainSample> s = make_train_samples(
        clean, degraded.degraded, cfg.train.component, cfg.model);
    for (auto& sample : s) samples.push_back(std::move(sample));
  }
  std::cout << "training on " << samples.size() << " blocks from "
            << cfg.data_dir << "\n";

  ModelParams<float> model = build_model<float>(cfg.model);
  const std::vector<double> history =
      train(samples, model, cfg.model, cfg.train);
  for (std::size_t e = 0; e < history.size(); ++e)
    std::cout << "epoch " << (e + 1) << ": mean loss " << history[e] << "\n";

  Checkpoint ckpt;
  ckpt.component = cfg.train.component;
  ckpt.qp = qp_tag.empty()
                ? (cfg.train.qp_set.size() == 1 ? cfg.train.qp_set[0] : 0)
                : std::stoi(qp_tag);
  ckpt.config = cfg.model;
  ckpt.params = std::move(model);
  save_checkpoint(ckpt, cfg.out);
  std::cout << "wrote " << cfg.out << "\n";
  return 0;
}

// ---- infer ------------------------------------------------------------------

int run_infer(const std::string& in, const std::string& qsteps_in,
              const std::string& ckpt_y, const std::string& ckpt_u,
              const std::string& ckpt_v, const std::string& ckpt_joint,
              const std::string& out, bool ascii) {
  PointCloud cloud = read_ply(in);
  cloud.qsteps = read_qsteps(qsteps_in, cloud.size());

  PointCloud restored;
  if (!ckpt_joint.empty()) {
    if (!ckpt_y.empty() || !ckpt_u.empty() || !ckpt_v.empty())
      throw std::runtime_error(
          "infer: --ckpt (joint) excludes --ckpt-y/--ckpt-u/--ckpt-v");
    Checkpoint ckpt = load_checkpoint(ckpt_joint);
    if (!ckpt.config.joint_yuv)
      throw std::runtime_error("infer: " + ckpt_joint +
                               " is not a joint-YUV checkpoint");
    const ModelParams<float>* models[1] = {&ckpt.params};
    restored = restore_cloud<float>(cloud, models, ckpt.config);
  } else {
    if (ckpt_y.empty() || ckpt_u.empty() || ckpt_v.empty())
      throw std::runtime_error(
          "infer: need --ckpt-y, --ckpt-u and --ckpt-v (or a joint --ckpt)");
    Checkpoint y = load_checkpoint(ckpt_y);
    Checkpoint u = load_checkpoint(ckpt_u);
    Checkpoint v = load_checkpoint(ckpt_v);
    const struct { const Checkpoint* c; Component want; const char* flag; }
        slots[3] = {{&y, Component::Y, "--ckpt-y"},
                    {&u, Component::U, "--ckpt-u"},
                    {&v, Component::V, "--ckpt-v"}};
    for (const auto& s : slots)
      if (s.c->component != s.want)
        throw std::runtime_error(std::string("infer: ") + s.flag +
                                 " checkpoint is tagged for component " +
                                 to_string(s.c->component) + ", expected " +
                                 to_string(s.want));
    const std::string cy = model_config_to_json(y.config);
    if (model_config_to_json(u.config) != cy ||
        model_config_to_json(v.config) != cy)
      throw std::runtime_error(
          "infer: the three checkpoints have different model configurations");
    const ModelParams<float>* models[3] = {&y.params, &u.params, &v.params};
    restored = restore_cloud<float>(cloud, models, y.config);
  }

  write_ply(restored, out, !ascii);
  std::cout << "wrote " << out << " (" << restored.size() << " points)\n";
  return 0;
}

// ---- metrics ----------------------------------------------------------------

int run_metrics(const std::string& ref_path, const std::string& test_path,
                const std::string& out, double bits) {
  PointCloud ref = read_ply(ref_path);
  PointCloud test = read_ply(test_path);
  if (ref.size() != test.size())
    throw std::runtime_error("metrics: point counts differ (" +
                             std::to_string(ref.size()) + " vs " +
                             std::to_string(test.size()) + ")");
  const Tensor2<float> ref_yuv = rgb_to_yuv(ref.attrs);
  const Tensor2<float> test_yuv = rgb_to_yuv(test.attrs);

  const double py = psnr(column(ref_yuv, 0), column(test_yuv, 0));
  const double pu = psnr(column(ref_yuv, 1), column(test_yuv, 1));
  const double pv = psnr(column(ref_yuv, 2), column(test_yuv, 2));
  const double pyuv = yuv_psnr(py, pu, pv);

  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "metric,value\n"
      << "psnr_y," << py << "\n"
      << "psnr_u," << pu << "\n"
      << "psnr_v," << pv << "\n"
      << "psnr_yuv," << pyuv << "\n";
  if (bits > 0)
    csv << "bpp," << bits / static_cast<double>(ref.size()) << "\n";

  std::cout << csv.str();
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("metrics: cannot open " + out);
    f << csv.str();
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

// ---- bdrate -----------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_bdrate(const std::string& anchor_path, const std::string& test_path) {
  const RdCurve anchor = parse_rd_curve_csv(read_text_file(anchor_path));
  const RdCurve test = parse_rd_curve_csv(read_text_file(test_path));
  const double bd = bd_rate(anchor, test);
  std::cout << "BD-rate: " << std::showpos << std::fixed
            << std::setprecision(2) << bd << "%\n";
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

int run_gradcheck(const RunConfig& cfg, double tolerance) {
  cfg.validate();

  // Deterministic synthetic block: random coordinates in the unit cube with
  // a smooth color field, degraded the same way training data is.
  const Index n = cfg.model.block_size;
  Rng rng(cfg.train.seed);
  PointCloud clean;
  clean.coords = Tensor2<float>(n, 3);
  clean.attrs = Tensor2<float>(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 3; ++j)
      clean.coords(i, j) = static_cast<float>(rng.uniform());
    clean.attrs(i, 0) =
        static_cast<float>(40.0 + 180.0 * clean.coords(i, 0));
    clean.attrs(i, 1) =
        static_cast<float>(60.0 + 120.0 * clean.coords(i, 1));
    clean.attrs(i, 2) =
        static_cast<float>(50.0 + 150.0 * clean.coords(i, 2));
  }
  DegradeResult degraded =
      synth_degrade(clean, cfg.train.qp_set, cfg.train.seed + 1);
  const std::vector<TrainSample> samples = make_train_samples(
      clean, degraded.degraded, cfg.train.component, cfg.model);

  const ModelParams<double> model = build_model<double>(cfg.model);
  const double err = gradient_check(model, samples.front(), cfg.model);
  std::cout << "max relative gradient error: " << err << " (tolerance "
            << tolerance << ")\n";
  if (!(err < tolerance)) {
    std::cerr << "gradcheck FAILED\n";
    return 1;
  }
  std::cout << "gradcheck passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud color restoration: multi-scale graph attention "
               "network with codec-step side information"};
  app.require_subcommand(1);

  // synth
  std::string synth_in, synth_out, synth_qsteps;
  int synth_qp = 51;
  std::uint64_t synth_seed = 1;
  bool synth_ascii = false;
  auto* synth = app.add_subcommand(
      "synth", "Synthetically degrade a clean cloud's colors");
  synth->add_option("--in", synth_in, "clean input PLY")->required();
  synth->add_option("--qp", synth_qp, "quantization parameter")->required();
  synth->add_option("--seed", synth_seed, "random seed (default 1)");
  synth->add_option("--out", synth_out, "degraded output PLY")->required();
  synth->add_option("--qsteps", synth_qsteps, "quantization-step sidecar")
      ->required();
  synth->add_flag("--ascii", synth_ascii, "write ASCII PLY");

  // partition
  std::string part_in, part_out_dir, part_qsteps;
  Index part_block = 2048;
  bool part_ascii = false;
  auto* partition =
      app.add_subcommand("partition", "Split a cloud into fixed-size blocks");
  partition->add_option("--in", part_in, "input PLY")->required();
  partition->add_option("--block-size", part_block, "points per block")
      ->required();
  partition->add_option("--out-dir", part_out_dir, "output directory")
      ->required();
  partition->add_option("--qsteps", part_qsteps,
                        "optional qstep sidecar to split alongside");
  partition->add_flag("--ascii", part_ascii, "write ASCII PLY");

  // train
  std::string train_config, train_component, train_data_dir, train_out,
      train_qp_tag;
  Index train_epochs = -1;
  double train_lr = -1.0;
  auto* train_cmd = app.add_subcommand(
      "train", "Train a restoration model on clean blocks (degradation is "
               "synthesized per the config's qp_set)");
  train_cmd->add_option("--config", train_config, "run configuration JSON")
      ->required();
  train_cmd->add_option("--component", train_component,
                        "Y, U or V (overrides config)");
  train_cmd->add_option("--data-dir", train_data_dir,
                        "directory of clean block PLYs (overrides config)");
  train_cmd->add_option("--out", train_out,
                        "checkpoint output path (overrides config)");
  train_cmd->add_option("--epochs", train_epochs, "override epoch count");
  train_cmd->add_option("--lr", train_lr, "override learning rate");
  train_cmd->add_option("--qp-tag", train_qp_tag,
                        "QP recorded in the checkpoint");

  // infer
  std::string infer_in, infer_qsteps, infer_y, infer_u, infer_v, infer_joint,
      infer_out;
  bool infer_ascii = false;
  auto* infer = app.add_subcommand("infer", "Restore a degraded cloud");
  infer->add_option("--in", infer_in, "degraded input PLY")->required();
  infer->add_option("--qsteps", infer_qsteps, "quantization-step sidecar")
      ->required();
  infer->add_option("--ckpt-y", infer_y, "Y-component checkpoint");
  infer->add_option("--ckpt-u", infer_u, "U-component checkpoint");
  infer->add_option("--ckpt-v", infer_v, "V-component checkpoint");
  infer->add_option("--ckpt", infer_joint, "joint-YUV checkpoint");
  infer->add_option("--out", infer_out, "restored output PLY")->required();
  infer->add_flag("--ascii", infer_ascii, "write ASCII PLY");

  // metrics
  std::string met_ref, met_test, met_out;
  double met_bits = 0.0;
  auto* metrics =
      app.add_subcommand("metrics", "PSNR metrics between two clouds");
  metrics->add_option("--ref", met_ref, "reference PLY")->required();
  metrics->add_option("--test", met_test, "test PLY")->required();
  metrics->add_option("--out", met_out, "CSV output path");
  metrics->add_option("--bits", met_bits,
                      "bitstream size in bits (reports bpp)");

  // bdrate
  std::string bd_anchor, bd_test;
  auto* bdrate = app.add_subcommand(
      "bdrate", "Bjontegaard delta rate between two rate-distortion curves");
  bdrate->add_option("--anchor", bd_anchor, "anchor curve CSV")->required();
  bdrate->add_option("--test", bd_test, "test curve CSV")->required();

  // gradcheck
  std::string gc_config;
  double gc_tolerance = 1e-3;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Compare analytic gradients to finite differences");
  gradcheck->add_option("--config", gc_config, "run configuration JSON")
      ->required();
  gradcheck->add_option("--tolerance", gc_tolerance,
                        "pass threshold (default 1e-3)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return run_synth(synth_in, synth_qp, synth_seed, synth_out, synth_qsteps,
                       synth_ascii);
    if (partition->parsed())
      return run_partition(part_in, part_block, part_out_dir, part_qsteps,
                           part_ascii);
    if (train_cmd->parsed()) {
      RunConfig cfg = load_run_config(train_config);
      if (!train_component.empty())
        cfg.train.component = component_from_string(train_component);
      if (!train_data_dir.empty()) cfg.data_dir = train_data_dir;
      if (!train_out.empty()) cfg.out = train_out;
      if (train_epochs > 0) cfg.train.epochs = train_epochs;
      if (train_lr >= 0.0) cfg.train.lr = train_lr;
      return run_train(std::move(cfg), train_qp_tag);
    }
    if (infer->parsed())
      return run_infer(infer_in, infer_qsteps, infer_y, infer_u, infer_v,
                       infer_joint, infer_out, infer_ascii);
    if (metrics->parsed())
      return run_metrics(met_ref, met_test, met_out, met_bits);
    if (bdrate->parsed()) return run_bdrate(bd_anchor, bd_test);
    if (gradcheck->parsed())
      return run_gradcheck(load_run_config(gc_config), gc_tolerance);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
