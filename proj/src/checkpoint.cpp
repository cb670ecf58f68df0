#include "xmdisc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmdisc/errors.hpp"

namespace xmdisc {
namespace {

constexpr const char* kFormat = "xmdisc-checkpoint";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, DiscourseModel& model, const RunConfig& config,
                     std::uint64_t split_seed, int best_epoch, const ClassWeights& class_weights) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["format"] = kFormat;
  meta["version"] = kVersion;
  auto labels = nlohmann::ordered_json::array();
  for (auto l : kAllLabels) labels.push_back(std::string(label_name(l)));
  meta["labels"] = labels;
  meta["split_seed"] = split_seed;
  meta["best_epoch"] = best_epoch;
  meta["class_weights"] = class_weights;
  meta["config"] = config.values();

  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw DataError("cannot write checkpoint: " + (dir / "params.bin").string());
  auto tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, param] : model.params()) {
    const Mat& m = param->value;
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        bin.write(reinterpret_cast<const char*>(&v), sizeof v);
        ++offset;
      }
    }
  }
  meta["tensors"] = tensors;
  std::ofstream js(dir / "checkpoint.json", std::ios::binary);
  if (!js) throw DataError("cannot write checkpoint: " + (dir / "checkpoint.json").string());
  js << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream js(dir / "checkpoint.json");
  if (!js) throw DataError("not a checkpoint directory: " + dir.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint.json: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  try {
    if (meta.at("format") != kFormat || meta.at("version") != kVersion) {
      throw DataError("unsupported checkpoint format in " + dir.string());
    }
    const auto labels = meta.at("labels").get<std::vector<std::string>>();
    bool same = labels.size() == static_cast<std::size_t>(kNumLabels);
    for (int c = 0; same && c < kNumLabels; ++c) same = labels[c] == label_name(label_from_code(c));
    if (!same) {
      throw DataError("checkpoint label mapping does not match the dataset label codes");
    }
    for (const auto& [key, value] : meta.at("config").items()) ckpt.config.set(key, value.get<std::string>());
    ckpt.split_seed = meta.at("split_seed").get<std::uint64_t>();
    ckpt.best_epoch = meta.at("best_epoch").get<int>();
    ckpt.class_weights = meta.at("class_weights").get<ClassWeights>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint.json: " + std::string(e.what()));
  }

  ckpt.model = DiscourseModel(ckpt.config.model_config());
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw DataError("missing params.bin in " + dir.string());
  std::map<std::string, nlohmann::json> index;
  for (const auto& t : meta.at("tensors")) index[t.at("name").get<std::string>()] = t;

  for (const auto& [name, param] : ckpt.model.params()) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    const auto rows = it->second.at("rows").get<Eigen::Index>();
    const auto cols = it->second.at("cols").get<Eigen::Index>();
    if (rows != param->value.rows() || cols != param->value.cols()) {
      throw DataError("tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model expects " + shape_str(param->value));
    }
    bin.seekg(static_cast<std::streamoff>(it->second.at("offset").get<std::uint64_t>() * sizeof(double)));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v = 0.0;
        if (!bin.read(reinterpret_cast<char*>(&v), sizeof v)) {
          throw DataError("truncated params.bin in " + dir.string());
        }
        param->value(r, c) = v;
      }
    }
  }
  return ckpt;
}

}  // namespace xmdisc
