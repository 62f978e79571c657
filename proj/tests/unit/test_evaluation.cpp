#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pm/error.hpp"
#include "pm/evaluation.hpp"

using namespace pm;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::PipelineFailure;
}

std::vector<Rating> ratings_of(const std::vector<double>& values) {
  std::vector<Rating> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Rating r;
    r.record_id = "r" + std::to_string(100 + i);
    r.s_bar = values[i];
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("build_criterion") {
  const auto c = build_criterion("cute");
  CHECK(c.keyword_a == "cute");
  CHECK(c.keyword_b == "not cute");
  CHECK(c.text_a() == "cute image");
  CHECK(c.text_b() == "not cute image");
  CHECK(build_criterion("cute", "ugly").keyword_b == "ugly");
  CHECK(code_of([] { build_criterion(""); }) == ErrorCode::EmptyKeyword);
  CHECK(code_of([] { build_criterion("", "ugly"); }) == ErrorCode::EmptyKeyword);
}

TEST_CASE("softmax rating") {
  CHECK(std::abs(softmax_rating(0.3, 0.1) - 0.5498) <= 1e-4);
  CHECK(std::abs(softmax_rating(0.3, 0.1) - testkit::oracle_rating(0.3, 0.1)) <= 1e-15);
  CHECK(softmax_rating(0.2, 0.2) == 0.5);
  testkit::Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double s1 = 2 * rng.uniform() - 1, s2 = 2 * rng.uniform() - 1;
    const double a = softmax_rating(s1, s2), b = softmax_rating(s2, s1);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(std::abs(a + b - 1.0) <= 1e-12);
    CHECK(std::abs(a - testkit::oracle_rating(s1, s2)) <= 1e-12);
  }
  // no overflow for extreme inputs
  CHECK(softmax_rating(1000, -1000) == 1.0);
  CHECK(softmax_rating(-1000, 1000) == 0.0);
}

TEST_CASE("rate_image") {
  MockEmbedder e;
  testkit::Rng rng(2);
  const auto img = testkit::random_unit(rng, 512);
  const auto c = build_criterion("cute", "ugly");
  const auto r = rate_image("x", img, c, e);
  CHECK(r.record_id == "x");
  CHECK(r.s1 == doctest::Approx(cosine_similarity(img, e.embed_text("cute image"))).epsilon(1e-12));
  CHECK(r.s2 == doctest::Approx(cosine_similarity(img, e.embed_text("ugly image"))).epsilon(1e-12));
  CHECK(r.s_bar == doctest::Approx(testkit::oracle_rating(r.s1, r.s2)).epsilon(1e-12));
  const auto swapped = rate_image("x", img, build_criterion("ugly", "cute"), e);
  CHECK(std::abs(r.s_bar + swapped.s_bar - 1.0) <= 1e-12);
  const auto same = rate_image("x", img, build_criterion("cute", "cute"), e);
  CHECK(same.s_bar == 0.5);
  CHECK(rate_image("x", img, embed_criterion(c, e)) == r);
}

TEST_CASE("histogram binning") {
  const auto empty = rating_histogram({}, 20);
  CHECK(empty.counts == std::vector<std::size_t>(20, 0));
  CHECK(empty.lo == 0.0);
  CHECK(empty.hi == 1.0);

  const auto h = rating_histogram(ratings_of({0.0, 0.1, 0.3, 0.5, 0.99, 1.0}), 10);
  CHECK(h.counts == std::vector<std::size_t>{1, 1, 0, 1, 0, 1, 0, 0, 0, 2});
  CHECK(h.total() == 6);

  const std::vector<double> vals{2.0, 2.0, 2.0};
  const auto flat = make_histogram(vals, 2.0, 2.0, 4);
  CHECK(flat.counts == std::vector<std::size_t>{3, 0, 0, 0});
  const std::vector<double> out_of_range{-1.0, 5.0, 1.5};
  CHECK(make_histogram(out_of_range, 1.0, 2.0, 2).total() == 1);
  CHECK(code_of([] { rating_histogram({}, 0); }) == ErrorCode::InvalidInput);
  CHECK(code_of([&] { make_histogram(vals, 3.0, 2.0, 2); }) == ErrorCode::InvalidRange);
}

TEST_CASE("uniform ratings fill bins evenly") {
  testkit::Rng rng(10);
  std::vector<double> v;
  for (int i = 0; i < 1000; ++i) v.push_back(rng.uniform());
  const auto h = rating_histogram(ratings_of(v), 10);
  const double sigma = std::sqrt(1000 * 0.1 * 0.9);
  for (auto c : h.counts) CHECK(std::abs(static_cast<double>(c) - 100.0) <= 5 * sigma);
  CHECK(h.total() == 1000);
}

TEST_CASE("filter_by_range") {
  testkit::Rng rng(6);
  std::vector<double> v;
  for (int i = 0; i < 300; ++i) v.push_back(rng.uniform());
  const auto rs = ratings_of(v);
  CHECK(filter_by_range(rs, 0.0, 1.0).size() == 300);
  std::vector<std::string> want;
  for (const auto& r : rs) {
    if (r.s_bar >= 0.6 && r.s_bar <= 0.9) want.push_back(r.record_id);
  }
  std::sort(want.begin(), want.end());
  CHECK(filter_by_range(rs, 0.6, 0.9) == want);
  const double exact = rs[17].s_bar;
  CHECK(filter_by_range(rs, exact, exact) == std::vector<std::string>{rs[17].record_id});
  CHECK(code_of([&] { filter_by_range(rs, 0.9, 0.6); }) == ErrorCode::InvalidRange);
  CHECK(code_of([&] { filter_by_range(rs, -0.1, 0.6); }) == ErrorCode::InvalidRange);
}

TEST_CASE("common pairs") {
  const auto pairs = parse_common_pairs(R"([{"a":"cute","b":"ugly"},{"a":"bright","b":"dark"}])");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].b == "dark");
  CHECK(code_of([] { parse_common_pairs("{}"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse_common_pairs(R"([{"a":1}])"); }) == ErrorCode::InvalidInput);
}
