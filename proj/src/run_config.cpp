#include "pcar/run_config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace pcar {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok)
      throw std::runtime_error(
          "config: unknown key '" +
          (where.empty() ? key : where + "." + key) + "'");
  }
}

const char* layer_kind_name(LayerKind k) {
  return k == LayerKind::ChebConv ? "cheb" : "attention";
}

LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "cheb") return LayerKind::ChebConv;
  if (s == "attention") return LayerKind::Attention;
  throw std::runtime_error("config: unknown layer kind '" + s +
                              "' (expected \"cheb\" or \"attention\")");
}

json model_to_json(const ModelConfig& m) {
  json layout = json::array();
  for (LayerKind k : m.extraction_layout) layout.push_back(layer_kind_name(k));
  return json{{"block_size", m.block_size},
              {"scales", m.scales},
              {"cheb_order", m.cheb_order},
              {"extraction_layout", layout},
              {"feature_width", m.feature_width},
              {"bottleneck_width", m.bottleneck_width},
              {"head_widths", m.head_widths},
              {"rescale_laplacian", m.rescale_laplacian},
              {"joint_yuv", m.joint_yuv},
              {"seed", m.seed}};
}

ModelConfig model_from_json(const json& obj, const std::string& where) {
  if (!obj.is_object())
    throw std::runtime_error("config: '" + where + "' must be an object");
  reject_unknown_keys(obj, where,
                      {"block_size", "scales", "cheb_order",
                       "extraction_layout", "feature_width",
                       "bottleneck_width", "head_widths", "rescale_laplacian",
                       "joint_yuv", "seed"});
  ModelConfig m;
  if (obj.contains("block_size")) m.block_size = obj.at("block_size");
  if (obj.contains("scales"))
    m.scales = obj.at("scales").get<std::vector<Index>>();
  if (obj.contains("cheb_order")) m.cheb_order = obj.at("cheb_order");
  if (obj.contains("extraction_layout")) {
    m.extraction_layout.clear();
    for (const auto& item : obj.at("extraction_layout"))
      m.extraction_layout.push_back(
          layer_kind_from_name(item.get<std::string>()));
  }
  if (obj.contains("feature_width")) m.feature_width = obj.at("feature_width");
  if (obj.contains("bottleneck_width"))
    m.bottleneck_width = obj.at("bottleneck_width");
  if (obj.contains("head_widths"))
    m.head_widths = obj.at("head_widths").get<std::vector<Index>>();
  if (obj.contains("rescale_laplacian"))
    m.rescale_laplacian = obj.at("rescale_laplacian");
  if (obj.contains("joint_yuv")) m.joint_yuv = obj.at("joint_yuv");
  if (obj.contains("seed")) m.seed = obj.at("seed");
  return m;
}

json train_to_json(const TrainConfig& t) {
  return json{{"lr", t.lr},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"batch_size", t.batch_size},
              {"epochs", t.epochs},
              {"component", to_string(t.component)},
              {"seed", t.seed},
              {"qp_set", t.qp_set}};
}

TrainConfig train_from_json(const json& obj) {
  if (!obj.is_object())
    throw std::runtime_error("config: 'train' must be an object");
  reject_unknown_keys(obj, "train",
                      {"lr", "beta1", "beta2", "batch_size", "epochs",
                       "component", "seed", "qp_set"});
  TrainConfig t;
  if (obj.contains("lr")) t.lr = obj.at("lr");
  if (obj.contains("beta1")) t.beta1 = obj.at("beta1");
  if (obj.contains("beta2")) t.beta2 = obj.at("beta2");
  if (obj.contains("batch_size")) t.batch_size = obj.at("batch_size");
  if (obj.contains("epochs")) t.epochs = obj.at("epochs");
  if (obj.contains("component"))
    t.component = component_from_string(obj.at("component").get<std::string>());
  if (obj.contains("seed")) t.seed = obj.at("seed");
  if (obj.contains("qp_set")) t.qp_set = obj.at("qp_set").get<std::vector<int>>();
  return t;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") +
                                e.what());
  }
  if (!doc.is_object())
    throw std::runtime_error("config: top level must be a JSON object");
  reject_unknown_keys(doc, "", {"model", "train", "paths"});

  // json type errors and bad enum strings surface as the same error kind as
  // every other malformed-document problem
  try {
    RunConfig rc;
    if (doc.contains("model"))
      rc.model = model_from_json(doc.at("model"), "model");
    if (doc.contains("train")) rc.train = train_from_json(doc.at("train"));
    if (doc.contains("paths")) {
      const json& paths = doc.at("paths");
      if (!paths.is_object())
        throw std::runtime_error("config: 'paths' must be an object");
      reject_unknown_keys(paths, "paths", {"data_dir", "out"});
      if (paths.contains("data_dir")) rc.data_dir = paths.at("data_dir");
      if (paths.contains("out")) rc.out = paths.at("out");
    }
    return rc;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string format_run_config(const RunConfig& config) {
  json doc{{"model", model_to_json(config.model)},
           {"train", train_to_json(config.train)},
           {"paths", json{{"data_dir", config.data_dir},
                          {"out", config.out}}}};
  return doc.dump(2) + "\n";
}

std::string model_config_to_json(const ModelConfig& config) {
  return model_to_json(config).dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") +
                                e.what());
  }
  try {
    return model_from_json(doc, "model");
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
}

}  // namespace pcar
