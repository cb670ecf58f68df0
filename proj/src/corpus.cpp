#include "xmdisc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmdisc/errors.hpp"
#include "xmdisc/image_io.hpp"
#include "xmdisc/rng.hpp"

namespace xmdisc {
namespace {

using json = nlohmann::ordered_json;

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

std::string required_string(const json& record, const char* field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw DataError(std::string("missing or non-string field '") + field + "'" + at_line(line));
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& record, const char* field,
                                           std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw DataError(std::string("field '") + field + "' must be a string or null" + at_line(line));
  }
  return it->get<std::string>();
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string format_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

std::filesystem::path Dataset::image_path(const MultimediaPost& post) const {
  std::filesystem::path p(post.image);
  return p.is_absolute() ? p : root / p;
}

const MultimediaPost& Dataset::find(const std::string& id) const {
  auto it = std::find_if(posts.begin(), posts.end(),
                         [&](const MultimediaPost& p) { return p.id == id; });
  if (it == posts.end()) throw DataError("unknown post id '" + id + "'");
  return *it;
}

std::vector<MultimediaPost> parse_dataset(std::istream& in, bool require_labels) {
  std::vector<MultimediaPost> posts;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (is_blank(raw)) continue;
    json record;
    try {
      record = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw DataError("malformed record" + at_line(line) + ": " + e.what());
    }
    if (!record.is_object()) throw DataError("malformed record" + at_line(line) + ": not an object");

    MultimediaPost post;
    post.id = required_string(record, "id", line);
    post.text = required_string(record, "text", line);
    post.image = required_string(record, "image", line);
    post.caption = optional_string(record, "caption", line);
    if (auto name = optional_string(record, "label", line)) {
      auto label = parse_label(*name);
      if (!label) throw DataError("unknown label '" + *name + "'" + at_line(line));
      post.label = label;
    }
    if (post.id.empty()) throw DataError("empty id" + at_line(line));
    if (is_blank(post.text)) throw DataError("empty text for post '" + post.id + "'" + at_line(line));
    if (require_labels && !post.label) {
      throw DataError("missing label for post '" + post.id + "'" + at_line(line));
    }
    if (!seen.insert(post.id).second) {
      throw DataError("duplicate id '" + post.id + "'" + at_line(line));
    }
    posts.push_back(std::move(post));
  }
  return posts;
}

Dataset load_dataset(const std::filesystem::path& path, bool require_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  Dataset dataset;
  dataset.root = path.parent_path();
  dataset.posts = parse_dataset(in, require_labels);
  return dataset;
}

void write_dataset(std::ostream& out, const std::vector<MultimediaPost>& posts) {
  for (const auto& post : posts) {
    json record;
    record["id"] = post.id;
    record["text"] = post.text;
    record["image"] = post.image;
    record["caption"] = post.caption ? json(*post.caption) : json(nullptr);
    record["label"] = post.label ? json(std::string(label_name(*post.label))) : json(nullptr);
    out << record.dump() << '\n';
  }
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

std::vector<std::string> validate_images(const Dataset& dataset) {
  std::vector<std::string> problems;
  for (const auto& post : dataset.posts) {
    try {
      decode_image(dataset.image_path(post));
    } catch (const DataError& e) {
      problems.push_back("post '" + post.id + "': " + e.what());
    }
  }
  return problems;
}

DatasetSplit make_split(const std::vector<MultimediaPost>& posts, std::uint64_t seed) {
  if (posts.size() < 10) {
    throw DataError("need at least 10 posts to split, got " + std::to_string(posts.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(posts.size());
  for (const auto& p : posts) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw DataError("duplicate id '" + *dup + "'");
  }
  Rng rng(seed);
  shuffle(std::span<std::string>(ids), rng);

  const std::size_t n_eval = ids.size() / 10;
  const std::size_t n_train = ids.size() - 2 * n_eval;
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_eval);
  split.test.assign(ids.begin() + n_train + n_eval, ids.end());
  return split;
}

std::string split_to_json(const DatasetSplit& split) {
  json record;
  record["seed"] = split.seed;
  record["train"] = split.train;
  record["validation"] = split.validation;
  record["test"] = split.test;
  return record.dump(1) + "\n";
}

DatasetSplit split_from_json(const std::string& text) {
  json record;
  try {
    record = json::parse(text);
    DatasetSplit split;
    split.seed = record.at("seed").get<std::uint64_t>();
    split.train = record.at("train").get<std::vector<std::string>>();
    split.validation = record.at("validation").get<std::vector<std::string>>();
    split.test = record.at("test").get<std::vector<std::string>>();
    return split;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split file: ") + e.what());
  }
}

DatasetSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return split_from_json(buf.str());
}

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write split file: " + path.string());
  out << split_to_json(split);
}

CorpusStats compute_stats(const std::vector<MultimediaPost>& posts) {
  CorpusStats stats;
  std::array<std::size_t, kNumLabels> token_sums{};
  std::size_t all_tokens = 0;
  for (const auto& post : posts) {
    if (!post.label) throw DataError("post '" + post.id + "' has no label");
    const int c = label_code(*post.label);
    const std::size_t n = whitespace_token_count(post.text);
    ++stats.counts[c];
    token_sums[c] += n;
    all_tokens += n;
    ++stats.length_histogram[c][n];
  }
  stats.total = posts.size();
  for (int c = 0; c < kNumLabels; ++c) {
    stats.empty[c] = stats.counts[c] == 0;
    stats.mean_length[c] =
        stats.empty[c] ? 0.0 : static_cast<double>(token_sums[c]) / static_cast<double>(stats.counts[c]);
  }
  stats.total_mean_length =
      posts.empty() ? 0.0 : static_cast<double>(all_tokens) / static_cast<double>(posts.size());
  return stats;
}

std::string render_stats_table(const CorpusStats& stats) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "" << std::right << std::setw(10) << "Total";
  for (auto label : kAllLabels) out << std::setw(9) << label_abbrev(label);
  out << "\n" << std::left << std::setw(6) << "Num" << std::right << std::setw(10)
      << format_thousands(stats.total);
  for (int c = 0; c < kNumLabels; ++c) out << std::setw(9) << format_thousands(stats.counts[c]);
  out << "\n" << std::left << std::setw(6) << "Len" << std::right << std::fixed
      << std::setprecision(2) << std::setw(10) << stats.total_mean_length;
  bool any_empty = false;
  for (int c = 0; c < kNumLabels; ++c) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << stats.mean_length[c] << (stats.empty[c] ? "*" : "");
    any_empty = any_empty || stats.empty[c];
    out << std::setw(9) << cell.str();
  }
  out << "\n";
  if (any_empty) out << "* empty bucket\n";
  return out.str();
}

std::string render_length_histograms(const CorpusStats& stats) {
  std::ostringstream out;
  out << "tokens";
  for (auto label : kAllLabels) out << '\t' << label_abbrev(label);
  out << '\n';
  std::size_t max_len = 0;
  for (const auto& h : stats.length_histogram) {
    if (!h.empty()) max_len = std::max(max_len, h.rbegin()->first);
  }
  for (std::size_t n = 0; n <= max_len; ++n) {
    out << n;
    for (const auto& h : stats.length_histogram) {
      auto it = h.find(n);
      out << '\t' << (it == h.end() ? 0 : it->second);
    }
    out << '\n';
  }
  return out.str();
}

std::string stats_to_json(const CorpusStats& stats) {
  json record;
  record["total"] = {{"count", stats.total}, {"mean_length", stats.total_mean_length}};
  json labels = json::object();
  for (auto label : kAllLabels) {
    const int c = label_code(label);
    json hist = json::object();
    for (const auto& [len, n] : stats.length_histogram[c]) hist[std::to_string(len)] = n;
    labels[std::string(label_name(label))] = {{"count", stats.counts[c]},
                                              {"mean_length", stats.mean_length[c]},
                                              {"empty", stats.empty[c]},
                                              {"length_histogram", hist}};
  }
  record["labels"] = labels;
  return record.dump(2) + "\n";
}

double agreement(const std::map<std::string, DiscourseLabel>& labels_a,
                 const std::map<std::string, DiscourseLabel>& labels_b) {
  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : labels_a) {
    if (!labels_b.count(id)) only_a.push_back(id);
  }
  for (const auto& [id, _] : labels_b) {
    if (!labels_a.count(id)) only_b.push_back(id);
  }
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "annotation id sets differ; only in first: [";
    for (std::size_t i = 0; i < only_a.size(); ++i) msg += (i ? ", " : "") + only_a[i];
    msg += "], only in second: [";
    for (std::size_t i = 0; i < only_b.size(); ++i) msg += (i ? ", " : "") + only_b[i];
    throw DataError(msg + "]");
  }
  if (labels_a.empty()) throw DataError("agreement over an empty id set is undefined");
  std::size_t same = 0;
  for (const auto& [id, label] : labels_a) {
    if (labels_b.at(id) == label) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(labels_a.size());
}

}  // namespace xmdisc
