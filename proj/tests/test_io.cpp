#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "pcar/checkpoint.hpp"
#include "pcar/ply_io.hpp"
#include "pcar/run_config.hpp"
#include "support/synthetic.hpp"

using namespace pcar;
using pcar::testing::integer_cloud;

namespace {

// Scratch directory, fresh per test run.
struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("pcar_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator()(const std::string& name) const {
    return (dir / name).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

// ---- PLY -----------------------------------------------------------------------

TEST_CASE("a minimal ascii ply parses to exact values") {
  TempDir tmp;
  write_text(tmp("one.ply"),
             "ply\n"
             "format ascii 1.0\n"
             "comment generated for a parser test\n"
             "element vertex 1\n"
             "property float x\n"
             "property float y\n"
             "property float z\n"
             "property uchar red\n"
             "property uchar green\n"
             "property uchar blue\n"
             "end_header\n"
             "1.5 -2.25 0.125 10 20 30\n");
  const PointCloud cloud = read_ply(tmp("one.ply"));
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.coords(0, 0) == 1.5f);
  CHECK(cloud.coords(0, 1) == -2.25f);
  CHECK(cloud.coords(0, 2) == 0.125f);
  CHECK(cloud.attrs(0, 0) == 10.0f);
  CHECK(cloud.attrs(0, 1) == 20.0f);
  CHECK(cloud.attrs(0, 2) == 30.0f);
  CHECK(cloud.qsteps.size() == 0);
}

TEST_CASE("binary and ascii writes round trip bitwise") {
  TempDir tmp;
  const PointCloud cloud = integer_cloud(257, 41);

  write_ply(cloud, tmp("b.ply"), /*binary=*/true);
  const PointCloud b = read_ply(tmp("b.ply"));
  CHECK(b.coords == cloud.coords);
  CHECK(b.attrs == cloud.attrs);

  write_ply(cloud, tmp("a.ply"), /*binary=*/false);
  const PointCloud a = read_ply(tmp("a.ply"));
  CHECK(a.coords == cloud.coords);
  CHECK(a.attrs == cloud.attrs);
}

TEST_CASE("the reader tolerates extra properties and elements") {
  TempDir tmp;
  SUBCASE("ascii, extra scalars and a list element") {
    write_text(tmp("extra.ply"),
               "ply\n"
               "format ascii 1.0\n"
               "element vertex 2\n"
               "property double x\n"
               "property double y\n"
               "property double z\n"
               "property float nx\n"
               "property uchar red\n"
               "property uchar green\n"
               "property uchar blue\n"
               "property uchar alpha\n"
               "element face 1\n"
               "property list uchar int vertex_indices\n"
               "end_header\n"
               "0 0 0 0.5 1 2 3 255\n"
               "1 1 1 0.5 4 5 6 255\n"
               "3 0 1 0\n");
    const PointCloud cloud = read_ply(tmp("extra.ply"));
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.attrs(1, 0) == 4.0f);
    CHECK(cloud.coords(1, 2) == 1.0f);
  }
  SUBCASE("binary, properties out of the conventional order") {
    std::vector<char> bytes;
    const std::string header =
        "ply\nformat binary_little_endian 1.0\n"
        "element vertex 1\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property int extra\n"
        "end_header\n";
    bytes.insert(bytes.end(), header.begin(), header.end());
    const unsigned char rgb[3] = {7, 8, 9};
    bytes.insert(bytes.end(), rgb, rgb + 3);
    const float xyz[3] = {1.0f, 2.0f, 3.0f};
    const char* p = reinterpret_cast<const char*>(xyz);
    bytes.insert(bytes.end(), p, p + sizeof(xyz));
    const std::int32_t extra = -5;
    p = reinterpret_cast<const char*>(&extra);
    bytes.insert(bytes.end(), p, p + sizeof(extra));
    TempDir tmp2;
    write_bytes(tmp2("odd.ply"), bytes);
    const PointCloud cloud = read_ply(tmp2("odd.ply"));
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.attrs(0, 2) == 9.0f);
    CHECK(cloud.coords(0, 1) == 2.0f);
  }
}

TEST_CASE("ply failure modes map to distinct exception types") {
  TempDir tmp;

  write_text(tmp("nored.ply"),
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar green\nproperty uchar blue\n"
             "end_header\n0 0 0 1 2\n");
  CHECK_THROWS_AS(read_ply(tmp("nored.ply")), PlyMissingProperty);

  write_text(tmp("novertex.ply"),
             "ply\nformat ascii 1.0\nelement face 0\n"
             "property list uchar int vertex_indices\nend_header\n");
  CHECK_THROWS_AS(read_ply(tmp("novertex.ply")), PlyMissingProperty);

  write_text(tmp("badmagic.ply"), "plyx\nformat ascii 1.0\nend_header\n");
  CHECK_THROWS_AS(read_ply(tmp("badmagic.ply")), PlyMalformedHeader);

  write_text(tmp("badkeyword.ply"),
             "ply\nformat ascii 1.0\nelment vertex 1\nend_header\n");
  CHECK_THROWS_AS(read_ply(tmp("badkeyword.ply")), PlyMalformedHeader);

  write_text(tmp("bigendian.ply"),
             "ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\n"
             "end_header\n");
  CHECK_THROWS_AS(read_ply(tmp("bigendian.ply")), PlyMalformedHeader);

  write_text(tmp("short.ply"),
             "ply\nformat ascii 1.0\nelement vertex 3\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\n"
             "end_header\n0 0 0 1 2 3\n1 1 1 4 5 6\n");
  CHECK_THROWS_AS(read_ply(tmp("short.ply")), PlyTruncated);

  // binary body one byte short
  const PointCloud cloud = integer_cloud(4, 42);
  write_ply(cloud, tmp("cut.ply"), true);
  auto bytes = read_bytes(tmp("cut.ply"));
  bytes.pop_back();
  write_bytes(tmp("cut.ply"), bytes);
  CHECK_THROWS_AS(read_ply(tmp("cut.ply")), PlyTruncated);

  CHECK_THROWS_AS(read_ply(tmp("does_not_exist.ply")), PlyError);
}

// ---- qsteps sidecar --------------------------------------------------------------

TEST_CASE("qsteps sidecar round trips and validates") {
  TempDir tmp;
  Tensor2<float> q(4, 1);
  q(0, 0) = 228.0f;
  q(1, 0) = 1.0f;
  q(2, 0) = 32.5f;
  q(3, 0) = 64.0f;
  write_qsteps(q, tmp("q.txt"));
  CHECK(read_qsteps(tmp("q.txt"), 4) == q);

  CHECK_THROWS_WITH_AS(read_qsteps(tmp("q.txt"), 5),
                       doctest::Contains("4"), std::runtime_error);

  write_text(tmp("neg.txt"), "1\n-2\n3\n");
  CHECK_THROWS_WITH_AS(read_qsteps(tmp("neg.txt"), 3),
                       doctest::Contains("line 2"), std::runtime_error);

  write_text(tmp("junk.txt"), "1\ntwo\n3\n");
  CHECK_THROWS_AS(read_qsteps(tmp("junk.txt"), 3), std::runtime_error);
}

// ---- checkpoints -----------------------------------------------------------------

TEST_CASE("checkpoint save/load round trips parameters bitwise") {
  TempDir tmp;
  const ModelConfig config = ModelConfig::tiny();
  Checkpoint ckpt;
  ckpt.component = Component::U;
  ckpt.qp = 46;
  ckpt.config = config;
  ckpt.params = build_model<float>(config);
  // perturb so the params are not the fresh-seed values
  {
    auto values = collect_params(ckpt.params);
    Rng rng(43);
    for (auto& [name, t] : values)
      for (Index i = 0; i < t.size(); ++i)
        t.data()[i] += static_cast<float>(rng.uniform(-1, 1));
    assign_params(ckpt.params, values);
  }

  save_checkpoint(ckpt, tmp("m.ckpt"));
  const Checkpoint back = load_checkpoint(tmp("m.ckpt"));

  CHECK(back.component == Component::U);
  CHECK(back.qp == 46);
  CHECK(model_config_to_json(back.config) == model_config_to_json(config));

  const auto want = collect_params(ckpt.params);
  const auto got = collect_params(back.params);
  REQUIRE(got.size() == want.size());
  for (const auto& [name, t] : want) CHECK(got.at(name) == t);

  // and the reloaded model computes the same forward pass
  const Block block = pcar::testing::random_block(config.block_size, 44);
  const auto a = forward(block, Component::U, ckpt.params, config);
  const auto b = forward(block, Component::U, back.params, config);
  CHECK(a == b);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  TempDir tmp;
  Checkpoint ckpt;
  ckpt.config = ModelConfig::tiny();
  ckpt.params = build_model<float>(ckpt.config);
  save_checkpoint(ckpt, tmp("m.ckpt"));
  const auto bytes = read_bytes(tmp("m.ckpt"));

  SUBCASE("truncation") {
    for (std::size_t keep : {std::size_t{4}, std::size_t{20},
                             bytes.size() / 2, bytes.size() - 1}) {
      std::vector<char> cut(bytes.begin(),
                            bytes.begin() + static_cast<long>(keep));
      write_bytes(tmp("cut.ckpt"), cut);
      CHECK_THROWS_WITH_AS(load_checkpoint(tmp("cut.ckpt")),
                           doctest::Contains("corrupt"), std::runtime_error);
    }
  }
  SUBCASE("trailing bytes") {
    auto fat = bytes;
    fat.push_back('\0');
    write_bytes(tmp("fat.ckpt"), fat);
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp("fat.ckpt")),
                         doctest::Contains("corrupt"), std::runtime_error);
  }
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    write_bytes(tmp("bad.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(tmp("bad.ckpt")), std::runtime_error);
  }
  SUBCASE("future version") {
    auto bad = bytes;
    bad[8] = 99;  // version u32 follows the 8-byte magic
    write_bytes(tmp("ver.ckpt"), bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp("ver.ckpt")),
                         doctest::Contains("version"), std::runtime_error);
  }
  SUBCASE("component tag inconsistent with a joint config") {
    auto bad = bytes;
    bad[12] = 3;  // joint tag, but the embedded config is per-component
    write_bytes(tmp("tag.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(tmp("tag.ckpt")), std::runtime_error);
  }
}

// ---- run configuration ------------------------------------------------------------

TEST_CASE("an empty json document yields the documented defaults") {
  const RunConfig config = parse_run_config("{}");
  CHECK(config.model.block_size == 2048);
  CHECK(config.model.scales == std::vector<Index>{2048, 1024, 512});
  CHECK(config.model.cheb_order == 3);
  CHECK(config.model.feature_width == 64);
  CHECK(config.model.joint_yuv == false);
  CHECK(config.train.lr == 1e-5);
  CHECK(config.train.batch_size == 8);
  CHECK(config.train.component == Component::Y);
  CHECK(config.train.qp_set == std::vector<int>{51, 46, 40, 34});
  CHECK(config.data_dir.empty());
  CHECK(config.out.empty());
}

TEST_CASE("run config round trips through its json form") {
  RunConfig config;
  config.model = ModelConfig::tiny();
  config.model.rescale_laplacian = true;
  config.model.extraction_layout = {LayerKind::Attention, LayerKind::ChebConv};
  config.train.lr = 3e-4;
  config.train.epochs = 12;
  config.train.component = Component::V;
  config.train.qp_set = {51};
  config.data_dir = "blocks/";
  config.out = "model.ckpt";

  const RunConfig back = parse_run_config(format_run_config(config));
  CHECK(back.model.block_size == config.model.block_size);
  CHECK(back.model.scales == config.model.scales);
  CHECK(back.model.extraction_layout == config.model.extraction_layout);
  CHECK(back.model.rescale_laplacian == true);
  CHECK(back.train.lr == config.train.lr);
  CHECK(back.train.epochs == 12);
  CHECK(back.train.component == Component::V);
  CHECK(back.train.qp_set == std::vector<int>{51});
  CHECK(back.data_dir == "blocks/");
  CHECK(back.out == "model.ckpt");
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"modle": {}})"),
                       doctest::Contains("modle"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"model": {"blocksize": 1}})"),
                       doctest::Contains("blocksize"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"train": {"learning_rate": 1}})"),
                       doctest::Contains("learning_rate"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"paths": {"output": "x"}})"),
                       doctest::Contains("output"), std::runtime_error);
}

TEST_CASE("run config rejects bad values") {
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"component": "W"}})"),
                  std::runtime_error);
  CHECK_THROWS_AS(
      parse_run_config(R"({"model": {"extraction_layout": ["conv"]}})"),
      std::runtime_error);
  CHECK_THROWS_AS(parse_run_config("not json"), std::runtime_error);
  CHECK_THROWS_AS(parse_run_config("[1,2]"), std::runtime_error);
}

TEST_CASE("model config json round trip") {
  ModelConfig config = ModelConfig::tiny();
  config.joint_yuv = true;
  config.head_widths = {16, 8, 3};
  config.seed = 99;
  const ModelConfig back = model_config_from_json(model_config_to_json(config));
  CHECK(model_config_to_json(back) == model_config_to_json(config));
  CHECK(back.joint_yuv == true);
  CHECK(back.seed == 99);
}
