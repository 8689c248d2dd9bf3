#include "pcar/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "pcar/run_config.hpp"

namespace pcar {
namespace {

constexpr char kMagic[8] = {'P', 'C', 'A', 'R', 'C', 'K', 'P', 'T'};

[[noreturn]] void corrupt(const std::string& what, const std::string& path) {
  throw std::runtime_error("checkpoint: corrupt file (" + what + "): " + path);
}

struct Writer {
  std::ofstream out;

  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::vector<char> buf;
  std::size_t pos = 0;
  const std::string& path;

  void bytes(void* p, std::size_t n) {
    if (pos + n > buf.size()) corrupt("truncated", path);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos + n > buf.size()) corrupt("truncated string", path);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.config.validate();
  const NamedTensors<float> values = collect_params(ckpt.params);

  Writer w{std::ofstream(path, std::ios::binary)};
  if (!w.out)
    throw std::runtime_error("checkpoint: cannot open " + path +
                             " for writing");

  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  const std::uint8_t tag = ckpt.config.joint_yuv
                               ? std::uint8_t{3}
                               : static_cast<std::uint8_t>(ckpt.component);
  w.bytes(&tag, 1);
  w.i32(ckpt.qp);
  w.str(model_config_to_json(ckpt.config));
  w.u64(values.size());
  for (const auto& [name, t] : values) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.bytes(t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
  }
  if (!w.out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  Reader r{std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>()),
           0, path};

  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    corrupt("bad magic", path);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error(
        "checkpoint: unsupported format version " + std::to_string(version) +
        " (this build reads version " + std::to_string(kCheckpointVersion) +
        "): " + path);

  Checkpoint ckpt;
  const std::uint8_t tag = r.u8();
  if (tag > 3) corrupt("invalid component tag", path);
  ckpt.qp = r.i32();
  ckpt.config = model_config_from_json(r.str());
  ckpt.config.validate();
  if (tag == 3) {
    if (!ckpt.config.joint_yuv)
      corrupt("joint tag on a per-component configuration", path);
    ckpt.component = Component::Y;
  } else {
    if (ckpt.config.joint_yuv)
      corrupt("per-component tag on a joint configuration", path);
    ckpt.component = static_cast<Component>(tag);
  }

  const std::uint64_t count = r.u64();
  NamedTensors<float> values;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Tensor2<float> t(static_cast<Index>(rows), static_cast<Index>(cols));
    r.bytes(t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
    if (!values.emplace(name, std::move(t)).second)
      corrupt("duplicate parameter '" + name + "'", path);
  }
  if (r.pos != r.buf.size()) corrupt("trailing data", path);

  ckpt.params = build_model<float>(ckpt.config);
  Index expected = 0;
  visit_params(ckpt.params,
               [&](const std::string&, const Tensor2<float>&) { ++expected; });
  if (static_cast<Index>(values.size()) != expected)
    corrupt("parameter array count does not match the configuration", path);
  assign_params(ckpt.params, values);
  return ckpt;
}

}  // namespace pcar
