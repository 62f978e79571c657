#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pm/error.hpp"
#include "pm/projection.hpp"

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

FeatureMatrix blob_features(std::size_t per_blob, std::uint64_t seed, std::vector<int>* labels = nullptr) {
  testkit::SyntheticCorpusSpec spec;
  spec.n_records = 2 * per_blob;
  spec.blobs = 2;
  spec.dim = 1024;
  const auto b = testkit::make_blobs(spec, seed);
  if (labels) *labels = b.labels;
  return pm::test::to_matrix(b.rows, 1024);
}

// Best accuracy of any line through the layout, sweeping its normal in 1 degree steps.
double separability(const std::vector<Point2>& pts, const std::vector<int>& labels) {
  double best = 0.0;
  for (int deg = 0; deg < 180; ++deg) {
    const double a = deg * M_PI / 180.0;
    std::vector<std::pair<double, int>> proj;
    for (std::size_t i = 0; i < pts.size(); ++i) proj.emplace_back(pts[i].x * std::cos(a) + pts[i].y * std::sin(a), labels[i]);
    std::sort(proj.begin(), proj.end());
    const std::size_t n = proj.size();
    std::size_t ones_left = 0, total_ones = 0;
    for (auto& p : proj) total_ones += p.second == 1;
    for (std::size_t cut = 0; cut <= n; ++cut) {
      if (cut > 0) ones_left += proj[cut - 1].second == 1;
      const std::size_t zeros_left = cut - ones_left;
      const std::size_t ones_right = total_ones - ones_left;
      const std::size_t zeros_right = (n - cut) - ones_right;
      const double acc = static_cast<double>(std::max(zeros_left + ones_right, ones_left + zeros_right)) / n;
      best = std::max(best, acc);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("kl_divergence examples") {
  SquareMatrix p(2, {0, 0.6, 0.4, 0});
  SquareMatrix q(2, {0, 0.5, 0.5, 0});
  CHECK(kl_divergence(p, q) == doctest::Approx(0.6 * std::log(1.2) + 0.4 * std::log(0.8)).epsilon(1e-12));
  CHECK(std::abs(kl_divergence(p, q) - 0.02013) <= 1e-5);
  CHECK(kl_divergence(p, p) == 0.0);
  SquareMatrix u(3, {0, 1.0 / 6, 1.0 / 6, 1.0 / 6, 0, 1.0 / 6, 1.0 / 6, 1.0 / 6, 0});
  CHECK(kl_divergence(u, u) == 0.0);
  CHECK(code_of([&] { kl_divergence(p, u); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("tiny inputs") {
  TsneParams params;
  CHECK(project_tsne(FeatureMatrix(0, 1024), params).empty());
  FeatureMatrix one(0, 1024);
  testkit::Rng rng(1);
  one.append_row(testkit::random_unit(rng, 1024));
  const auto p1 = project_tsne(one, params);
  REQUIRE(p1.size() == 1);
  CHECK(p1[0] == Point2{0, 0});
  one.append_row(testkit::random_unit(rng, 1024));
  const auto p2 = project_tsne(one, params);
  REQUIRE(p2.size() == 2);
  CHECK(std::abs(std::hypot(p2[0].x - p2[1].x, p2[0].y - p2[1].y) - 1.0) <= 1e-12);
}

TEST_CASE("effective perplexity is clamped") {
  CHECK(effective_perplexity(30, 1000) == 30);
  CHECK(effective_perplexity(30, 31) == doctest::Approx(10));
  CHECK(effective_perplexity(30, 3) == 1);
}

TEST_CASE("joint input affinities are symmetric and sum to one") {
  const auto f = blob_features(10, 3);
  const auto p = joint_input_affinities(f, 5.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    CHECK(p(i, i) == 0.0);
    for (std::size_t j = 0; j < p.n; ++j) {
      sum += p(i, j);
      CHECK(p(i, j) == doctest::Approx(p(j, i)));
    }
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("non finite features are rejected") {
  auto f = blob_features(5, 1);
  f.row(2)[0] = NAN;
  CHECK(code_of([&] { project_tsne(f, {}); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("projection separates two blobs and lowers KL") {
  std::vector<int> labels;
  const auto f = blob_features(50, 7, &labels);
  TsneParams params;
  params.rng_seed = 7;
  const auto report = project_tsne_report(f, params);
  REQUIRE(report.points.size() == 100);
  CHECK(report.final_kl <= report.initial_kl);
  CHECK(separability(report.points, labels) >= 0.95);
  for (const auto& p : report.points) CHECK((std::isfinite(p.x) && std::isfinite(p.y)));
}

TEST_CASE("projection is deterministic and permutation equivariant") {
  const auto f = blob_features(15, 9);
  TsneParams params;
  params.rng_seed = 3;
  params.iterations = 300;
  const auto a = project_tsne(f, params);
  CHECK(a == project_tsne(f, params));

  const std::size_t n = f.rows();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
  FeatureMatrix g(0, 1024);
  for (std::size_t i = 0; i < n; ++i) g.append_row(f.row(perm[i]));
  const auto b = project_tsne(g, params);
  for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == a[perm[i]]);

  params.rng_seed = 4;
  CHECK(project_tsne(f, params) != a);
}
