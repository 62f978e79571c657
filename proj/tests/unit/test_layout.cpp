#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pm/error.hpp"
#include "pm/layout.hpp"

using namespace pm;

namespace {

std::vector<LabeledPoint> labeled(const std::vector<std::pair<double, double>>& pts) {
  std::vector<LabeledPoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i) out.push_back({"p" + std::to_string(10 + i), {pts[i].first, pts[i].second}});
  return out;
}

std::map<std::string, Point2> positions(const std::vector<LabeledPoint>& pts) {
  std::map<std::string, Point2> m;
  for (const auto& p : pts) m[p.record_id] = p.position;
  return m;
}

KeywordPlacement placement(const std::string& term, Point2 p) {
  KeywordPlacement k;
  k.term = make_term(term);
  k.position = p;
  return k;
}

void check_monotone(const ClusterTree& tree, const LodAssignment& lod) {
  const auto parent = tree.parents();
  for (const auto& n : tree.nodes) {
    const int p = parent[static_cast<std::size_t>(n.node_id)];
    if (p >= 0) CHECK(lod.node_level[static_cast<std::size_t>(p)] <= lod.node_level[static_cast<std::size_t>(n.node_id)]);
  }
}

}  // namespace

TEST_CASE("keyword_position") {
  const std::vector<WeightedPoint> two{{{0, 0}, 3}, {{4, 0}, 1}};
  CHECK(keyword_position(two) == Point2{1.0, 0.0});
  const std::vector<WeightedPoint> one{{{2.5, -1}, 7}};
  CHECK(keyword_position(one) == Point2{2.5, -1});
  const std::vector<WeightedPoint> none{{{2.5, -1}, 0}};
  CHECK_THROWS_AS(keyword_position(none), Error);
  CHECK_THROWS_AS(keyword_position({}), Error);
}

TEST_CASE("keyword_position stays inside the hull") {
  testkit::Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<WeightedPoint> w;
    std::vector<std::pair<double, double>> pts;
    std::vector<double> weights;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p{rng.normal() * 10, rng.normal() * 10};
      const std::size_t c = 1 + rng.below(5);
      w.push_back({p, c});
      pts.emplace_back(p.x, p.y);
      weights.push_back(static_cast<double>(c));
    }
    const auto pos = keyword_position(w);
    const auto ref = testkit::oracle_weighted_mean(pts, weights);
    CHECK(std::abs(pos.x - ref.first) <= 1e-9);
    CHECK(std::abs(pos.y - ref.second) <= 1e-9);
    CHECK(testkit::in_convex_hull(pts, {pos.x, pos.y}, 1e-9));
  }
}

TEST_CASE("jitter_collisions") {
  SUBCASE("no collisions leaves placements alone") {
    std::vector<KeywordPlacement> in{placement("a", {0, 0}), placement("b", {1, 0})};
    CHECK(jitter_collisions(in, 0.1, 5) == in);
  }
  SUBCASE("colliding placements move within the radius") {
    std::vector<KeywordPlacement> in{placement("a", {1, 1}), placement("b", {1, 1}), placement("c", {1, 1})};
    const auto out = jitter_collisions(in, 0.25, 5);
    CHECK(out[0].position == Point2{1, 1});
    for (std::size_t i = 1; i < 3; ++i) {
      const double d = std::hypot(out[i].position.x - 1, out[i].position.y - 1);
      CHECK(d > 0.0);
      CHECK(d <= 0.25);
    }
    CHECK(out[1].position != out[2].position);
    CHECK(jitter_collisions(in, 0.25, 5) == out);
    CHECK(jitter_collisions(in, 0.25, 6) != out);
  }
  CHECK_THROWS_AS(jitter_collisions({}, 0.0, 1), Error);
}

TEST_CASE("default jitter radius") {
  const std::vector<Point2> pts{{0, 0}, {3, 4}};
  CHECK(default_jitter_radius(pts) == doctest::Approx(0.05));
  CHECK(default_jitter_radius({}) == 1e-3);
}

TEST_CASE("representative_image") {
  const auto pts = labeled({{0, 0}, {1, 0}, {2, 0}});
  const auto tree = build_dendrogram(pts);
  CHECK(representative_image(tree, tree.root, positions(pts)) == "p11");
  CHECK(representative_image(tree, 2, positions(pts)) == "p12");

  testkit::Rng rng(4);
  std::vector<std::pair<double, double>> raw;
  for (int i = 0; i < 20; ++i) raw.emplace_back(rng.uniform(), rng.uniform());
  const auto lp = labeled(raw);
  const auto t2 = build_dendrogram(lp);
  double cx = 0, cy = 0;
  for (auto& p : raw) {
    cx += p.first / 20;
    cy += p.second / 20;
  }
  std::string best;
  double bd = INFINITY;
  for (const auto& p : lp) {
    const double d = std::hypot(p.position.x - cx, p.position.y - cy);
    if (d < bd) {
      bd = d;
      best = p.record_id;
    }
  }
  CHECK(representative_image(t2, t2.root, positions(lp)) == best);
}

TEST_CASE("assign_lod") {
  SUBCASE("single leaf at the deepest level") {
    const auto tree = build_dendrogram(labeled({{0, 0}}));
    const auto lod = assign_lod(tree, 4);
    CHECK(lod.node_level == std::vector<int>{3});
  }
  SUBCASE("four point two blob tree") {
    const auto tree = build_dendrogram(labeled({{0, 0}, {0, 1}, {10, 0}, {10, 1}}));
    const auto lod = assign_lod(tree, 4);
    CHECK(lod.node_level[6] == 0);
    CHECK(lod.node_level[4] == 1);
    CHECK(lod.node_level[5] == 1);
    CHECK(lod.node_level[4] > lod.node_level[6]);
    for (int leaf = 0; leaf < 4; ++leaf) CHECK(lod.node_level[leaf] == 3);
    check_monotone(tree, lod);
  }
  SUBCASE("monotone along every path of random trees") {
    testkit::Rng rng(9);
    for (int t = 0; t < 30; ++t) {
      std::vector<std::pair<double, double>> raw;
      const std::size_t n = 2 + rng.below(60);
      for (std::size_t i = 0; i < n; ++i) raw.emplace_back(rng.normal() * 5, rng.normal() * 5);
      const auto tree = build_dendrogram(labeled(raw));
      for (int levels : {1, 2, 4, 6}) {
        const auto lod = assign_lod(tree, levels);
        check_monotone(tree, lod);
        for (int l : lod.node_level) CHECK((l >= 0 && l < levels));
        CHECK(lod.node_level[static_cast<std::size_t>(tree.root)] == 0);
      }
    }
  }
  CHECK_THROWS_AS(assign_lod({}, 0), Error);
}

TEST_CASE("assign_representatives covers eligible clusters") {
  testkit::Rng rng(2);
  std::vector<std::pair<double, double>> raw;
  for (int i = 0; i < 40; ++i) raw.emplace_back(rng.normal() + (i % 2) * 20, rng.normal());
  const auto lp = labeled(raw);
  auto tree = build_dendrogram(lp);
  mark_eligible(tree);
  auto lod = assign_lod(tree);
  assign_representatives(lod, tree, positions(lp));
  std::size_t eligible = 0;
  for (const auto& n : tree.nodes) {
    if (!n.eligible) continue;
    ++eligible;
    const auto leaves = tree.leaf_ids(n.node_id);
    CHECK(std::find(leaves.begin(), leaves.end(), lod.representatives.at(n.node_id)) != leaves.end());
  }
  CHECK(lod.representatives.size() == eligible);
  CHECK(eligible > 0);
}
