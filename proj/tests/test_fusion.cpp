#include <doctest.h>

#include "oracles.hpp"
#include "xmdisc/errors.hpp"
#include "xmdisc/fusion.hpp"

using namespace xmdisc;

namespace {

constexpr FusionStrategy kStrategies[] = {FusionStrategy::MultiheadAtt, FusionStrategy::ConcatFuse,
                                          FusionStrategy::Attention, FusionStrategy::CoAttention};

struct Inputs {
  TextFeatures text;
  ImageFeatures image;
  CaptionFeatures caption;
};

Inputs random_inputs(int d, int tokens, int regions, int caption_tokens, Rng& rng) {
  Inputs in;
  in.text.states.resize(tokens, d);
  fill_uniform(in.text.states, 1.0, rng);
  in.text.pooled = max_pool(in.text.states, tokens);
  in.image.regions.resize(regions, d);
  fill_uniform(in.image.regions, 1.0, rng);
  in.image.grid = static_cast<int>(std::lround(std::sqrt(regions)));
  in.caption.states.resize(caption_tokens, d);
  fill_uniform(in.caption.states, 1.0, rng);
  return in;
}

}  // namespace

TEST_CASE("fusion names and modality lists") {
  for (auto s : kStrategies) CHECK(parse_fusion(fusion_name(s)) == s);
  CHECK_THROWS_AS(parse_fusion("gated"), ConfigError);
  CHECK(ModalitySet::parse("text,caption") == ModalitySet{true, false, true});
  CHECK(ModalitySet::parse(" image ").str() == "image");
  CHECK(ModalitySet::parse("caption,image,text").full());
  CHECK_THROWS_AS(ModalitySet::parse(""), ConfigError);
  CHECK_THROWS_AS(ModalitySet::parse("text,audio"), ConfigError);
}

TEST_CASE("fused vector layout") {
  Rng rng(1);
  const int d = 48;
  auto in = random_inputs(d, 5, 196, 7, rng);
  FusionLayer layer(FusionStrategy::MultiheadAtt, AttentionConfig{6, d}, rng);
  auto out = layer.forward(in.text, in.image, in.caption, ModalitySet{});
  CHECK(out.fused.size() == 3 * d);
  CHECK(out.fused.segment(0, d) == out.attended_caption);
  CHECK(out.fused.segment(d, d) == out.text_part);
  CHECK(out.fused.segment(2 * d, d) == out.attended_image);
  CHECK(out.text_part == in.text.pooled);
  REQUIRE(out.image_attention.size() == 6);
  for (const auto& w : out.image_attention) {
    CHECK(w.rows() == 1);
    CHECK(w.cols() == 196);
    CHECK(w.sum() == doctest::Approx(1.0));
  }
  CHECK(out.caption_attention.size() == 6);
  CHECK(out.mean_image_attention().sum() == doctest::Approx(1.0));
}

TEST_CASE("concat of zero inputs is zero") {
  Rng rng(2);
  const int d = 8;
  Inputs in;
  in.text.states = Mat::Zero(3, d);
  in.text.pooled = Row::Zero(d);
  in.image.regions = Mat::Zero(4, d);
  in.caption.states = Mat::Zero(2, d);
  FusionLayer layer(FusionStrategy::ConcatFuse, AttentionConfig{2, d}, rng);
  auto out = layer.forward(in.text, in.image, in.caption, ModalitySet{});
  CHECK(out.fused.size() == 3 * d);
  CHECK(out.fused.isZero(0.0));
  CHECK_FALSE(out.has_attention());
  CHECK(layer.params().empty());
}

TEST_CASE("one identity head equals parameter-free attention") {
  Rng rng(3);
  const int d = 16;
  auto in = random_inputs(d, 4, 9, 5, rng);
  FusionLayer multi(FusionStrategy::MultiheadAtt, AttentionConfig{1, d}, rng);
  for (auto* mha : {&multi.image_attention, &multi.caption_attention}) {
    mha->w_query.value.setIdentity();
    mha->w_key.value.setIdentity();
    mha->w_value.value.setIdentity();
    mha->w_out.value.setIdentity();
  }
  FusionLayer plain(FusionStrategy::Attention, AttentionConfig{1, d}, rng);
  auto a = multi.forward(in.text, in.image, in.caption, ModalitySet{});
  auto b = plain.forward(in.text, in.image, in.caption, ModalitySet{});
  CHECK((a.fused - b.fused).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("changing the caption leaves the text slot alone") {
  Rng rng(4);
  const int d = 12;
  for (auto s : kStrategies) {
    CAPTURE(fusion_name(s));
    auto in = random_inputs(d, 6, 4, 3, rng);
    FusionLayer layer(s, AttentionConfig{3, d}, rng);
    auto before = layer.forward(in.text, in.image, in.caption, ModalitySet{});
    fill_uniform(in.caption.states, 1.0, rng);
    auto after = layer.forward(in.text, in.image, in.caption, ModalitySet{});
    CHECK(after.text_part == before.text_part);
    CHECK(after.attended_image == before.attended_image);
    CHECK(after.attended_caption != before.attended_caption);
  }
}

TEST_CASE("absent modalities give zero slots") {
  Rng rng(5);
  const int d = 12;
  auto in = random_inputs(d, 3, 4, 2, rng);
  for (auto s : kStrategies) {
    CAPTURE(fusion_name(s));
    FusionLayer layer(s, AttentionConfig{2, d}, rng);
    auto out = layer.forward(in.text, in.image, in.caption, ModalitySet::parse("text,image"));
    CHECK(out.attended_caption.isZero(0.0));
    CHECK_FALSE(out.attended_image.isZero(0.0));
    out = layer.forward(in.text, in.image, in.caption, ModalitySet::parse("caption"));
    CHECK(out.text_part.isZero(0.0));
    CHECK(out.attended_image.isZero(0.0));
    if (s == FusionStrategy::Attention) {
      // no query means uniform attention over caption tokens
      CHECK(out.caption_attention[0](0, 0) == doctest::Approx(0.5));
    }
  }
}

TEST_CASE("fusion rejects mismatched widths") {
  Rng rng(6);
  auto in = random_inputs(8, 2, 4, 2, rng);
  FusionLayer layer(FusionStrategy::Attention, AttentionConfig{2, 10}, rng);
  CHECK_THROWS_AS(layer.forward(in.text, in.image, in.caption, ModalitySet{}), ShapeError);
}

TEST_CASE("fusion gradients match finite differences") {
  const int d = 8;
  for (auto s : kStrategies) {
    for (const char* mods : {"text,image,caption", "image,caption", "text,image"}) {
      CAPTURE(fusion_name(s));
      CAPTURE(mods);
      Rng rng(7);
      auto in = random_inputs(d, 3, 3, 2, rng);
      const auto modalities = ModalitySet::parse(mods);
      FusionLayer layer(s, AttentionConfig{2, d}, rng);
      Row r(3 * d);
      fill_uniform(r, 1.0, rng);
      auto loss = [&] { return layer.forward(in.text, in.image, in.caption, modalities).fused.dot(r); };

      FusionLayer::Trace trace;
      layer.forward(in.text, in.image, in.caption, modalities, &trace);
      for (auto& [name, p] : layer.params()) p->zero_grad();
      const Mat d_regions = layer.backward(trace, modalities, r);

      for (auto& [name, p] : layer.params()) {
        CAPTURE(name);
        CHECK(oracle::relative_error(p->grad, oracle::finite_difference(p->value, loss)) < 1e-3);
      }
      CHECK(oracle::relative_error(d_regions, oracle::finite_difference(in.image.regions, loss)) < 1e-3);
    }
  }
}
