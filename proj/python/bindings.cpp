#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "xmdisc/attention.hpp"
#include "xmdisc/classifier.hpp"
#include "xmdisc/config.hpp"
#include "xmdisc/corpus.hpp"
#include "xmdisc/encoders.hpp"
#include "xmdisc/errors.hpp"
#include "xmdisc/metrics.hpp"
#include "xmdisc/pipeline.hpp"
#include "xmdisc/quality.hpp"

namespace py = pybind11;
using namespace xmdisc;

namespace {

DiscourseLabel to_label(const std::string& name) {
  if (auto label = parse_label(name)) return *label;
  throw DataError("unknown label '" + name + "'");
}

std::vector<DiscourseLabel> to_labels(const std::vector<std::string>& names) {
  std::vector<DiscourseLabel> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(to_label(n));
  return out;
}

py::dict post_to_dict(const MultimediaPost& p) {
  py::dict d;
  d["id"] = p.id;
  d["text"] = p.text;
  d["image"] = p.image;
  d["caption"] = p.caption ? py::cast(*p.caption) : py::none();
  d["label"] = p.label ? py::cast(std::string(label_name(*p.label))) : py::none();
  return d;
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

RunConfig config_from(const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

// BGR uint8 image copied into an H x W x 3 array.
py::array_t<std::uint8_t> to_array(const cv::Mat& bgr) {
  cv::Mat img = bgr.isContinuous() ? bgr : bgr.clone();
  py::array_t<std::uint8_t> out({img.rows, img.cols, img.channels()});
  std::memcpy(out.mutable_data(), img.data, img.total() * img.elemSize());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-modality discourse classification core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<BackendUnavailable>(m, "BackendUnavailable", base.ptr());
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.attr("LABELS") = [] {
    std::vector<std::string> names;
    for (auto l : kAllLabels) names.emplace_back(label_name(l));
    return names;
  }();
  m.attr("MAX_SEQUENCE_TOKENS") = kMaxSequenceTokens;

  m.def("load_dataset", [](const std::string& path, bool require_labels) {
    const auto data = load_dataset(path, require_labels);
    py::list posts;
    for (const auto& p : data.posts) posts.append(post_to_dict(p));
    return posts;
  }, py::arg("path"), py::arg("require_labels") = true);

  m.def("make_split", [](const std::vector<std::string>& ids, std::uint64_t seed) {
    std::vector<MultimediaPost> posts(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) posts[i].id = ids[i];
    const auto split = make_split(posts, seed);
    return py::make_tuple(split.train, split.validation, split.test);
  }, py::arg("ids"), py::arg("seed"), "Seeded 80/10/10 split of post ids.");

  m.def("compute_stats", [](const std::string& path) {
    return json_loads(stats_to_json(compute_stats(load_dataset(path, true).posts)));
  }, py::arg("path"));

  m.def("agreement", [](const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
    std::map<std::string, DiscourseLabel> la, lb;
    for (const auto& [k, v] : a) la[k] = to_label(v);
    for (const auto& [k, v] : b) lb[k] = to_label(v);
    return agreement(la, lb);
  }, py::arg("labels_a"), py::arg("labels_b"));

  m.def("class_weights", [](const std::array<std::size_t, kNumLabels>& counts) { return class_weights(counts); },
        py::arg("counts"));

  m.def("weighted_cross_entropy", [](const Mat& probs, const std::vector<std::string>& labels,
                                     const ClassWeights& weights) {
    if (probs.cols() != kNumLabels) throw ShapeError("probabilities must have 5 columns");
    std::vector<Row> rows;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) rows.emplace_back(probs.row(i));
    return weighted_cross_entropy(rows, to_labels(labels), weights);
  }, py::arg("probs"), py::arg("labels"), py::arg("weights"));

  m.def("scaled_dot_attention", [](const Mat& q, const Mat& k, const Mat& v) {
    auto out = scaled_dot_attention(q, k, v);
    return py::make_tuple(out.output, out.weights);
  }, py::arg("query"), py::arg("key"), py::arg("value"));

  m.def("multi_head_attention", [](const Mat& q, const Mat& k, const Mat& v, const Mat& w_query, const Mat& w_key,
                                   const Mat& w_value, const Mat& w_out, int heads) {
    Rng rng(0);
    MultiHeadAttention mha(AttentionConfig{heads, static_cast<int>(q.cols())}, rng);
    auto assign = [](Param& p, const Mat& value, const char* name) {
      if (value.rows() != p.value.rows() || value.cols() != p.value.cols()) {
        throw ShapeError(std::string(name) + " must be " + shape_str(p.value) + ", got " + shape_str(value));
      }
      p.value = value;
    };
    assign(mha.w_query, w_query, "w_query");
    assign(mha.w_key, w_key, "w_key");
    assign(mha.w_value, w_value, "w_value");
    assign(mha.w_out, w_out, "w_out");
    auto out = mha.forward(q, k, v);
    return py::make_tuple(out.output, out.weights);
  }, py::arg("query"), py::arg("key"), py::arg("value"), py::arg("w_query"), py::arg("w_key"), py::arg("w_value"),
     py::arg("w_out"), py::arg("heads"));

  m.def("f1_report", [](const std::vector<std::string>& preds, const std::vector<std::string>& truths) {
    return json_loads(report_to_json(f1_report(to_labels(preds), to_labels(truths))));
  }, py::arg("predictions"), py::arg("truths"));

  m.def("significance", [](const std::vector<std::string>& a, const std::vector<std::string>& b,
                           const std::vector<std::string>& truths, int trials, std::uint64_t seed) {
    return significance(to_labels(a), to_labels(b), to_labels(truths), trials, seed);
  }, py::arg("preds_a"), py::arg("preds_b"), py::arg("truths"), py::arg("trials") = 10000, py::arg("seed") = 0);

  m.def("encode_text", [](const std::string& text, const std::string& backend, int hidden_size, int max_tokens) {
    const auto enc = make_text_encoder(BackendSpec::parse(backend), hidden_size);
    auto f = encode_text(text, *enc, max_tokens);
    return py::make_tuple(f.states, f.pooled);
  }, py::arg("text"), py::arg("backend") = "stub:0", py::arg("hidden_size") = 768,
     py::arg("max_tokens") = kMaxSequenceTokens);

  m.def("register_text_backend", [](const std::string& id, int hidden_size, py::function fn) {
    register_text_backend(id, hidden_size, [fn](const std::vector<std::string>& tokens) {
      py::gil_scoped_acquire gil;
      return fn(tokens).cast<Mat>();
    });
  }, py::arg("identifier"), py::arg("hidden_size"), py::arg("provider"),
     "provider(tokens: list[str]) -> array of shape (len(tokens), hidden_size)");

  m.def("register_image_backbone", [](const std::string& id, int channels, py::function fn) {
    register_image_backbone(id, channels, [fn](const cv::Mat& bgr, int grid) {
      py::gil_scoped_acquire gil;
      return fn(to_array(bgr), grid).cast<Mat>();
    });
  }, py::arg("identifier"), py::arg("channels"), py::arg("provider"),
     "provider(bgr: uint8 array HxWx3, grid: int) -> array of shape (grid*grid, channels)");

  m.def("register_captioner", [](const std::string& id, py::function fn) {
    register_captioner(id, [fn](const std::string& post_id, const std::string& image_path) {
      py::gil_scoped_acquire gil;
      return fn(post_id, image_path).cast<std::string>();
    });
  }, py::arg("identifier"), py::arg("provider"), "provider(post_id: str, image_path: str) -> str");

  m.def("clear_backend_registries", &clear_backend_registries);
  // Registered providers hold Python callables; release them while the
  // interpreter is still alive.
  py::module_::import("atexit").attr("register")(py::cpp_function([] { clear_backend_registries(); }));

  m.def("default_config", [] {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : RunConfig::defaults()) out[k] = v;
    return out;
  });

  m.def("train_and_evaluate", [](const std::string& dataset_path, std::uint64_t split_seed,
                                 const std::map<std::string, std::string>& config) {
    const auto data = load_dataset(dataset_path, true);
    const auto split = make_split(data.posts, split_seed);
    const auto result = train_and_evaluate(data, split, config_from(config));
    py::dict out;
    out["report"] = json_loads(report_to_json(result.test_report));
    py::list log;
    for (const auto& rec : result.training.log) log.append(json_loads(epoch_record_to_json(rec)));
    out["log"] = log;
    out["best_epoch"] = result.training.best_epoch;
    std::vector<std::string> preds;
    for (auto l : result.test_predictions) preds.emplace_back(label_name(l));
    out["test_ids"] = result.test_ids;
    out["test_predictions"] = preds;
    return out;
  }, py::arg("dataset"), py::arg("split_seed") = 0, py::arg("config") = std::map<std::string, std::string>{});

  m.def("quality_screen", [](const std::string& dataset_path, const std::map<std::string, std::string>& config) {
    const auto data = load_dataset(dataset_path, false);
    const auto thresholds = config_from(config).quality_thresholds();
    py::list out;
    for (const auto& post : data.posts) out.append(json_loads(verdict_to_json(quality_screen(data, post, thresholds))));
    return out;
  }, py::arg("dataset"), py::arg("config") = std::map<std::string, std::string>{});
}
