#include "pm/projection.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <numeric>

#include "pm/error.hpp"
#include "pm/hash.hpp"
#include "pm/retrieval.hpp"

namespace pm {

SquareMatrix::SquareMatrix(std::size_t size, std::vector<double> v) : n(size), values(std::move(v)) {
  if (values.size() != n * n) throw Error(ErrorCode::ShapeMismatch, "SquareMatrix");
}

double kl_divergence(const SquareMatrix& p, const SquareMatrix& q) {
  if (p.n != q.n || p.values.size() != q.values.size()) throw Error(ErrorCode::ShapeMismatch, "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double pv = p.values[i];
    if (pv > 0.0) kl += pv * std::log(pv / q.values[i]);
  }
  return kl;
}

double effective_perplexity(double requested, std::size_t n) {
  if (n < 2) return requested;
  const double cap = static_cast<double>(n - 1) / 3.0;
  return std::max(1.0, std::min(requested, cap));
}

namespace {

std::uint64_t row_content_hash(std::span<const float> row) {
  std::uint64_t h = kFnvOffsetBasis;
  for (float f : row) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= kFnvPrime;
    }
  }
  return h;
}

// Rows sorted by content so the optimisation never sees input order.
std::vector<std::size_t> canonical_order(const FeatureMatrix& features, std::vector<std::uint64_t>& hashes) {
  const std::size_t n = features.rows();
  hashes.resize(n);
  for (std::size_t i = 0; i < n; ++i) hashes[i] = row_content_hash(features.row(i));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
    const auto ra = features.row(a);
    const auto rb = features.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end(), [](float x, float y) {
      return std::bit_cast<std::uint32_t>(x) < std::bit_cast<std::uint32_t>(y);
    });
  });
  return order;
}

FeatureMatrix reorder(const FeatureMatrix& features, std::span<const std::size_t> order) {
  FeatureMatrix out(0, features.dim());
  for (std::size_t i : order) out.append_row(features.row(i));
  return out;
}

void check_input(const FeatureMatrix& features) {
  if (!features.all_finite()) throw Error(ErrorCode::NonFiniteInput, "project_tsne");
  for (std::size_t i = 0; i < features.rows(); ++i) {
    if (l2_norm(features.row(i)) == 0.0) throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i));
  }
}

void calibrate_row(std::span<const double> dist, std::size_t self, double perplexity, std::span<double> out) {
  const std::size_t n = dist.size();
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != self) dmin = std::min(dmin, dist[j]);
  }
  const double target = std::log(perplexity);
  double beta = 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 50; ++iter) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == self) {
        out[j] = 0.0;
        continue;
      }
      const double shifted = dist[j] - dmin;
      out[j] = std::exp(-beta * shifted);
      sum += out[j];
      weighted += shifted * out[j];
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != self) {
      out[j] = std::exp(-beta * (dist[j] - dmin));
      sum += out[j];
    }
  }
  for (double& v : out) v /= sum;
}

double student_t_numerators(std::span<const Point2> y, SquareMatrix& num) {
  const std::size_t n = y.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i].x - y[j].x;
      const double dy = y[i].y - y[j].y;
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num(i, j) = v;
      num(j, i) = v;
      total += 2.0 * v;
    }
  }
  return total;
}

}  // namespace

SquareMatrix joint_input_affinities(const FeatureMatrix& features, double perplexity) {
  const std::size_t n = features.rows();
  SquareMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = cosine_distance(features.row(i), features.row(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  SquareMatrix cond(n);
  for (std::size_t i = 0; i < n; ++i) {
    calibrate_row({dist.values.data() + i * n, n}, i, perplexity, {cond.values.data() + i * n, n});
  }
  SquareMatrix joint(n);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) joint(i, j) = (cond(i, j) + cond(j, i)) / denom;
  }
  return joint;
}

SquareMatrix joint_output_affinities(std::span<const Point2> points) {
  SquareMatrix q(points.size());
  const double total = student_t_numerators(points, q);
  if (total > 0.0) {
    for (double& v : q.values) v /= total;
  }
  return q;
}

TsneReport project_tsne_report(const FeatureMatrix& features, const TsneParams& params) {
  if (params.iterations < 1) throw Error(ErrorCode::InvalidInput, "iterations must be >= 1");
  check_input(features);
  const std::size_t n = features.rows();
  TsneReport report;
  report.effective_perplexity = effective_perplexity(params.perplexity, n);
  if (n == 0) return report;
  if (n == 1) {
    report.points = {Point2{}};
    return report;
  }

  std::vector<std::uint64_t> hashes;
  const auto order = canonical_order(features, hashes);
  if (n == 2) {
    report.points.resize(2);
    report.points[order[0]] = {-0.5, 0.0};
    report.points[order[1]] = {0.5, 0.0};
    return report;
  }

  const FeatureMatrix canon = reorder(features, order);
  const SquareMatrix p = joint_input_affinities(canon, report.effective_perplexity);

  std::vector<Point2> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    SplitMix64 gen(mix64(params.rng_seed, hashes[order[k]]));
    y[k].x = params.init_scale * gen.gaussian();
    y[k].y = params.init_scale * gen.gaussian();
  }
  report.initial_kl = kl_divergence(p, joint_output_affinities(y));

  std::vector<Point2> velocity(n), gains(n, Point2{1.0, 1.0}), grad(n);
  SquareMatrix num(n);
  for (std::size_t iter = 0; iter < params.iterations; ++iter) {
    const double exaggeration = iter < params.exaggeration_iterations ? params.early_exaggeration : 1.0;
    const double momentum =
        iter < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;
    const double total = student_t_numerators(y, num);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = num(i, j);
        const double mult = (exaggeration * p(i, j) - w / total) * w;
        gx += mult * (y[i].x - y[j].x);
        gy += mult * (y[i].y - y[j].y);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
      assert(std::isfinite(grad[i].x) && std::isfinite(grad[i].y));
    }
    const auto step = [&](double g, double& v, double& gain, double& pos) {
      gain = (std::signbit(g) != std::signbit(v)) ? gain + 0.2 : gain * 0.8;
      gain = std::max(gain, 0.01);
      v = momentum * v - params.learning_rate * gain * g;
      pos += v;
    };
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      step(grad[i].x, velocity[i].x, gains[i].x, y[i].x);
      step(grad[i].y, velocity[i].y, gains[i].y, y[i].y);
      mx += y[i].x;
      my += y[i].y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (auto& pt : y) {
      pt.x -= mx;
      pt.y -= my;
    }
  }
  report.final_kl = kl_divergence(p, joint_output_affinities(y));

  report.points.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(y[k].x) || !std::isfinite(y[k].y)) throw Error(ErrorCode::NonFiniteInput, "t-SNE diverged");
    report.points[order[k]] = y[k];
  }
  return report;
}

std::vector<Point2> project_tsne(const FeatureMatrix& features, const TsneParams& params) {
  return project_tsne_report(features, params).points;
}

}  // namespace pm
