#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pm/corpus.hpp"

namespace pm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Exact t-SNE with cosine input distances.
struct TsneParams {
  double perplexity = 30.0;  // clamped to [1, (N-1)/3]
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iteration = 250;
  double init_scale = 1e-4;
  std::uint64_t rng_seed = 0;
};

/// Dense n x n matrix, row-major.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t size) : n(size), values(size * size, 0.0) {}
  SquareMatrix(std::size_t size, std::vector<double> v);

  double operator()(std::size_t i, std::size_t j) const noexcept { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return values[i * n + j]; }
};

struct TsneReport {
  std::vector<Point2> points;
  double initial_kl = 0.0;  // at the initial layout, no exaggeration
  double final_kl = 0.0;
  double effective_perplexity = 0.0;
};

std::vector<Point2> project_tsne(const FeatureMatrix& features, const TsneParams& params);
TsneReport project_tsne_report(const FeatureMatrix& features, const TsneParams& params);

/// Sum of p * ln(p / q) over all entries, with 0 * ln 0 = 0.
double kl_divergence(const SquareMatrix& p, const SquareMatrix& q);

/// Symmetrised joint input affinities, rows calibrated to `perplexity` by
/// binary search on the per-point precision (50 steps, entropy tolerance 1e-5).
SquareMatrix joint_input_affinities(const FeatureMatrix& features, double perplexity);

/// Student-t joint affinities of a 2-D layout.
SquareMatrix joint_output_affinities(std::span<const Point2> points);

/// The perplexity actually used for `n` points.
double effective_perplexity(double requested, std::size_t n);

}  // namespace pm
