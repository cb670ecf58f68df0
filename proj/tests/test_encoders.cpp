#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "xmdisc/encoders.hpp"
#include "xmdisc/errors.hpp"

using namespace xmdisc;

namespace {

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

}  // namespace

TEST_CASE("backend spec parsing") {
  auto stub = BackendSpec::parse("stub:42");
  CHECK(stub.kind == BackendSpec::Kind::Stub);
  CHECK(stub.seed == 42);
  CHECK(stub.str() == "stub:42");
  auto pre = BackendSpec::parse("vinai/bertweet-base");
  CHECK(pre.kind == BackendSpec::Kind::Pretrained);
  CHECK(pre.str() == "vinai/bertweet-base");
  CHECK_THROWS_AS(BackendSpec::parse("stub:"), ConfigError);
  CHECK_THROWS_AS(BackendSpec::parse("stub:x1"), ConfigError);
}

TEST_CASE("encode_text truncates and pools") {
  StubTextEncoder enc(1, 16);
  SUBCASE("25 tokens are capped at 20") {
    auto f = encode_text(words(25), enc);
    CHECK(f.length() == 20);
    CHECK(f.states.cols() == 16);
  }
  SUBCASE("single token pools to itself") {
    auto f = encode_text("hello", enc);
    CHECK(f.length() == 1);
    CHECK(f.pooled == Row(f.states.row(0)));
  }
  SUBCASE("same text twice is identical") {
    auto a = encode_text("the same tweet", enc);
    auto b = encode_text("the same tweet", enc);
    CHECK(a.states == b.states);
    CHECK(a.pooled == b.pooled);
  }
  SUBCASE("custom cap") {
    CHECK(encode_text(words(12), enc, 5).length() == 5);
  }
  SUBCASE("empty text") {
    CHECK_THROWS_AS(encode_text("   ", enc), DataError);
  }
}

TEST_CASE("stub token vectors are fixed functions of token and seed") {
  StubTextEncoder a(7, 8), b(7, 8), c(8, 8);
  const Mat sa = a.token_states({"alpha", "beta", "alpha"});
  CHECK(sa == b.token_states({"alpha", "beta", "alpha"}));
  CHECK(Row(sa.row(0)) == Row(sa.row(2)));
  CHECK(Row(sa.row(0)) != Row(sa.row(1)));
  CHECK(sa != c.token_states({"alpha", "beta", "alpha"}));
  CHECK(sa.maxCoeff() < 1.0);
  CHECK(sa.minCoeff() >= -1.0);
  // first coordinate of "alpha" under seed 7, frozen to detect silent changes
  const double frozen = sa(0, 0);
  CHECK(StubTextEncoder(7, 8).token_states({"alpha"})(0, 0) == frozen);
}

TEST_CASE("max pooling matches element-wise recomputation") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = 1 + static_cast<Eigen::Index>(rng.below(20));
    const auto cols = 1 + static_cast<Eigen::Index>(rng.below(10));
    Mat m(rows, cols);
    fill_uniform(m, 3.0, rng);
    const Row pooled = max_pool(m, rows);
    for (Eigen::Index k = 0; k < cols; ++k) {
      double mx = m(0, k);
      for (Eigen::Index i = 1; i < rows; ++i) mx = std::max(mx, m(i, k));
      CHECK(pooled[k] == mx);
    }
    // padding rows beyond the length are ignored
    Mat padded(rows + 3, cols);
    padded.topRows(rows) = m;
    padded.bottomRows(3).setConstant(100.0);
    CHECK(max_pool(padded, rows) == pooled);
  }
}

TEST_CASE("encode_caption shares the text path") {
  StubTextEncoder enc(3, 12);
  const std::string s = "a dog sitting in a red car";
  CHECK(encode_caption(s, enc).states == encode_text(s, enc).states);
  CHECK(encode_caption(words(30), enc).length() == 20);
  CHECK_THROWS_AS(encode_caption("", enc), DataError);
}

TEST_CASE("pretrained backends must be registered") {
  try {
    make_text_encoder(BackendSpec::parse("vinai/bertweet-base"), 768);
    FAIL("expected an error");
  } catch (const BackendUnavailable& e) {
    CHECK(std::string(e.what()).find("vinai/bertweet-base") != std::string::npos);
  }
  CHECK_THROWS_AS(make_image_backbone(BackendSpec::parse("resnet101"), 2048), BackendUnavailable);
  CHECK_THROWS_AS(make_captioner(BackendSpec::parse("coco-captioner")), BackendUnavailable);

  register_text_backend("test/ones", 4, [](const std::vector<std::string>& tokens) {
    return Mat(Mat::Ones(static_cast<Eigen::Index>(tokens.size()), 4));
  });
  auto enc = make_text_encoder(BackendSpec::parse("test/ones"), 4);
  CHECK(encode_text("one two", *enc).pooled == Row::Ones(4));
  CHECK_THROWS_AS(make_text_encoder(BackendSpec::parse("test/ones"), 8), ConfigError);

  register_text_backend("test/bad", 4, [](const std::vector<std::string>&) { return Mat(Mat::Ones(1, 3)); });
  CHECK_THROWS_AS(encode_text("x", *make_text_encoder(BackendSpec::parse("test/bad"), 4)), ShapeError);

  clear_backend_registries();
  CHECK_THROWS_AS(make_text_encoder(BackendSpec::parse("test/ones"), 4), BackendUnavailable);
}

TEST_CASE("encode_image shapes") {
  auto dir = fixtures::temp_dir("encode_image");
  auto img = fixtures::solid_image(dir / "red.png", 50, 30, 0, 0, 255);
  StubImageBackbone backbone(1, 32);
  Rng rng(2);
  ImageProjection proj(32, 12, rng);
  SUBCASE("default grid gives 196 regions") {
    auto f = encode_image(img, backbone, proj, 14, 1u << 24);
    CHECK(f.regions.rows() == 196);
    CHECK(f.regions.cols() == 12);
    CHECK(f.grid == 14);
    CHECK(f.raw_channels == 32);
  }
  SUBCASE("grid 1 is a single global region") {
    auto f = encode_image(img, backbone, proj, 1, 1u << 24);
    CHECK(f.regions.rows() == 1);
  }
  SUBCASE("memory cap") {
    CHECK_THROWS_AS(encode_image(img, backbone, proj, 14, 196 * 31), ConfigError);
  }
  SUBCASE("undecodable") {
    std::ofstream(dir / "junk.png") << "junk";
    CHECK_THROWS_AS(encode_image(dir / "junk.png", backbone, proj, 14, 1u << 24), DataError);
    CHECK_THROWS_AS(encode_image(dir / "missing.png", backbone, proj, 14, 1u << 24), DataError);
  }
}

TEST_CASE("stub backbone separates black and white images") {
  auto dir = fixtures::temp_dir("black_white");
  auto black = fixtures::solid_image(dir / "black.png", 32, 32, 0, 0, 0);
  auto white = fixtures::solid_image(dir / "white.png", 32, 32, 255, 255, 255);
  StubImageBackbone backbone(5, 64);
  const Mat fb = image_feature_map(black, backbone, 14, 8, 1u << 24);
  const Mat fw = image_feature_map(white, backbone, 14, 8, 1u << 24);
  CHECK(fb.rows() == 196);
  CHECK((fb - fw).norm() > 1.0);
  // repeatable
  CHECK(fb == image_feature_map(black, backbone, 14, 8, 1u << 24));
}

TEST_CASE("adaptive average pooling") {
  cv::Mat img(4, 4, CV_64FC1);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) img.at<double>(r, c) = r * 4 + c;
  const Mat pooled = adaptive_average_pool(img, 2);
  CHECK(pooled(0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
  CHECK(pooled(1, 0) == doctest::Approx((2 + 3 + 6 + 7) / 4.0));  // row 0, col 1
  CHECK(pooled(2, 0) == doctest::Approx((8 + 9 + 12 + 13) / 4.0));
  CHECK(adaptive_average_pool(img, 1)(0, 0) == doctest::Approx(7.5));
  // more cells than pixels still covers every cell
  CHECK(adaptive_average_pool(img, 14).rows() == 196);
}

TEST_CASE("image projection is affine with a linear part") {
  Rng rng(4);
  ImageProjection proj(10, 6, rng);
  Mat x(3, 10), y(3, 10);
  fill_uniform(x, 1.0, rng);
  fill_uniform(y, 1.0, rng);
  const Mat b = Mat::Ones(3, 1) * proj.bias.value;
  auto linear = [&](const Mat& m) { return Mat(proj.apply(m) - b); };
  const double alpha = -2.75;
  CHECK((linear(alpha * x) - alpha * linear(x)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((linear(x + y) - linear(x) - linear(y)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(proj.weight.value.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(10.0));
  CHECK_THROWS_AS(proj.apply(Mat::Zero(3, 9)), ShapeError);
}

TEST_CASE("captions") {
  auto dir = fixtures::temp_dir("captions");
  write_captions(dir / "caps.jsonl", {{"id1", "a dog in a car"}, {"id2", "two people"}});
  auto caps = PrecomputedCaptions::load(dir / "caps.jsonl");
  CHECK(caps.size() == 2);
  CHECK(caption_image("id1", "unused.png", caps) == "a dog in a car");
  CHECK_THROWS_WITH_AS(caption_image("id9", "unused.png", caps), "no precomputed caption for post 'id9'",
                       DataError);

  auto img = fixtures::solid_image(dir / "blue.png", 20, 20, 220, 60, 30);
  StubCaptioner stub;
  const auto text = caption_image("x", img, stub);
  CHECK(text.find("blue") != std::string::npos);
  CHECK(text == caption_image("x", img, stub));
}
