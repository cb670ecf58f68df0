#include "xmdisc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xmdisc/errors.hpp"

namespace xmdisc {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid value '" + text + "' for '" + key + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid value '" + text + "' for '" + key + "'");
  }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"seed", "0"},
      {"batch-size", "100"},
      {"lr", "5e-5"},
      {"max-epochs", "20"},
      {"patience", "5"},
      {"class-weights", ""},
      {"heads", "6"},
      {"hidden-size", "768"},
      {"grid", "14"},
      {"raw-channels", "2048"},
      {"text-cap", "20"},
      {"caption-cap", "20"},
      {"fusion", "multihead"},
      {"modalities", "text,image,caption"},
      {"backend-text", "stub:0"},
      {"backend-image", "stub:0"},
      {"caption-source", "precomputed"},
      {"captions", ""},
      {"unfreeze-backbone", "false"},
      {"image-memory-cap", "67108864"},
      {"significance-trials", "10000"},
      {"threshold-portrait", "0.5"},
      {"threshold-low-quality", "0.5"},
      {"threshold-ocr-subtitle", "0.3"},
      {"sharpness-reference", "100"},
      {"min-resolution", "64"},
      {"face-area-reference", "0.1"},
  };
  return kDefaults;
}

bool RunConfig::is_known(const std::string& key) {
  const auto& d = defaults();
  return std::any_of(d.begin(), d.end(), [&](const auto& kv) { return kv.first == key; });
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!is_known(key)) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": unknown configuration key '" + key + "'");
    }
    values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }

double RunConfig::get_double(const std::string& key) const { return parse_real(key, get(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean '" + v + "' for '" + key + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [k, _] : defaults()) out << k << " = " << values_.at(k) << "\n";
  return out.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << to_text();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg;
  cfg.hidden_size = get_int("hidden-size");
  cfg.heads = get_int("heads");
  cfg.grid = get_int("grid");
  cfg.raw_channels = get_int("raw-channels");
  cfg.text_cap = get_int("text-cap");
  cfg.caption_cap = get_int("caption-cap");
  cfg.fusion = parse_fusion(get("fusion"));
  cfg.modalities = ModalitySet::parse(get("modalities"));
  cfg.seed = get_u64("seed");
  cfg.validate();
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.batch_size = get_int("batch-size");
  cfg.learning_rate = get_double("lr");
  cfg.max_epochs = get_int("max-epochs");
  cfg.patience = get_int("patience");
  cfg.seed = get_u64("seed");
  const std::string& weights = get("class-weights");
  if (!weights.empty()) {
    ClassWeights w{};
    std::istringstream in(weights);
    std::string item;
    int n = 0;
    while (std::getline(in, item, ',')) {
      if (n >= kNumLabels) break;
      w[n++] = parse_real("class-weights", trim(item));
    }
    if (n != kNumLabels || std::getline(in, item, ',')) {
      throw ConfigError("class-weights needs exactly 5 comma-separated values");
    }
    cfg.class_weights = w;
  }
  cfg.validate();
  return cfg;
}

QualityThresholds RunConfig::quality_thresholds() const {
  QualityThresholds t;
  t.portrait = get_double("threshold-portrait");
  t.low_quality = get_double("threshold-low-quality");
  t.ocr_subtitle = get_double("threshold-ocr-subtitle");
  t.sharpness_reference = get_double("sharpness-reference");
  t.min_resolution = get_int("min-resolution");
  t.face_area_reference = get_double("face-area-reference");
  return t;
}

}  // namespace xmdisc
