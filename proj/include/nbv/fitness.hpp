#pragma once

#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/visibility.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <vector>

namespace nbv {

// Closed-form determinant of a symmetric 3x3 matrix.
inline double det3(const Mat3& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

// Per-vertex scoring weights: alpha_i = (1 - tanh(m_i - mu)) / 2. Strictly
// decreasing in the view count m_i; mu shifts where the reward rolls off.
struct Weights {
  std::vector<double> alpha;

  double sum() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
};

inline double weight_for_count(int count, double mu) {
  return 0.5 * (1.0 - std::tanh(static_cast<double>(count) - mu));
}

inline Weights weights(std::span<const int> counts, double mu) {
  Weights w;
  w.alpha.reserve(counts.size());
  for (int m : counts) w.alpha.push_back(weight_for_count(m, mu));
  return w;
}

struct FitnessOptions {
  double mu = 3.0;  // weight offset inside tanh
  // Information-matrix regularizer, > 0. Sized near a single close-range
  // observation's Jacobian spectrum rather than at machine epsilon: a tiny
  // lambda hands every first sight of a vertex a -2*log(lambda) windfall,
  // which turns the determinant objective into a coverage chaser. At this
  // scale rank-deficient vertices contribute almost no candidate-dependent
  // signal (matching the exact objective, where their determinant factor is
  // zero regardless of the candidate) and the score is dominated by how much
  // a view sharpens structure it can actually triangulate.
  double lambda = 0.1;
  // Every stride-th vertex participates in scoring (1 = all). Occlusion tests
  // still run against the full mesh.
  uint32_t vertex_stride = 1;
};

// Scoring state for candidate views against a set of placed cameras:
// visibility counts (for the visibility fitness) and per-vertex 3x3
// information matrices G_i = sum_k A_{k,i}^T A_{k,i} over cameras that see
// vertex i (for the geometry fitness). Immutable during scoring; commit_view
// returns an updated copy.
struct FitnessContext {
  std::shared_ptr<const Scene> scene;
  FitnessOptions options;
  std::vector<uint32_t> eval_vertices;
  std::vector<CameraView> placed;
  std::vector<int> counts;       // m_i over eval_vertices
  Weights alpha;                 // weights for current counts
  std::vector<Mat3> info;        // G_i over eval_vertices
  std::vector<double> base_logdet;  // log det(G_i + lambda I)
  double base_sum = 0.0;            // sum of base_logdet

  std::size_t eval_count() const { return eval_vertices.size(); }
};

// Visibility of the evaluated vertex subset from one candidate view.
inline std::vector<uint8_t> candidate_visibility(const FitnessContext& ctx,
                                                 const CameraView& cand) {
  return visibility_vector(*ctx.scene, cand, ctx.eval_vertices);
}

namespace detail {

inline double logdet_regularized(const Mat3& g, double lambda) {
  Mat3 m = g;
  m.diagonal().array() += lambda;
  return std::log(det3(m));
}

// Adds one camera's contribution to the context state. `w` is the camera's
// visibility over ctx.eval_vertices.
inline void accumulate_view(FitnessContext& ctx, const CameraView& cam,
                            const std::vector<uint8_t>& w) {
  for (std::size_t i = 0; i < ctx.eval_count(); ++i) {
    if (!w[i]) continue;
    ctx.counts[i] += 1;
    const Vec3& v = ctx.scene->mesh.vertices[ctx.eval_vertices[i]];
    const Mat23 a = colinearity_jacobian(cam, v);
    ctx.info[i] += a.transpose() * a;
    const double updated = logdet_regularized(ctx.info[i], ctx.options.lambda);
    ctx.base_sum += updated - ctx.base_logdet[i];
    ctx.base_logdet[i] = updated;
  }
  ctx.alpha = weights(ctx.counts, ctx.options.mu);
  ctx.placed.push_back(cam);
}

}  // namespace detail

inline FitnessContext make_fitness_context(std::shared_ptr<const Scene> scene,
                                           std::span<const CameraView> cams,
                                           FitnessOptions options = {}) {
  FitnessContext ctx;
  ctx.scene = std::move(scene);
  ctx.options = options;
  const uint32_t stride = std::max<uint32_t>(1, options.vertex_stride);
  for (uint32_t v = 0; v < ctx.scene->mesh.vertex_count(); v += stride)
    ctx.eval_vertices.push_back(v);
  const std::size_t n = ctx.eval_count();
  ctx.counts.assign(n, 0);
  ctx.info.assign(n, Mat3::Zero());
  ctx.base_logdet.assign(n, 3.0 * std::log(options.lambda));
  ctx.base_sum = static_cast<double>(n) * 3.0 * std::log(options.lambda);
  ctx.alpha = weights(ctx.counts, options.mu);
  for (const CameraView& cam : cams) {
    detail::accumulate_view(ctx, cam, candidate_visibility(ctx, cam));
  }
  return ctx;
}

// Visibility fitness J_v = sum_i alpha_i w_i for the candidate view.
inline double visibility_fitness(const FitnessContext& ctx, const CameraView& cand) {
  const std::vector<uint8_t> w = candidate_visibility(ctx, cand);
  double jv = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i]) jv += ctx.alpha.alpha[i];
  }
  return jv;
}

// Geometry (D-optimality) fitness in the log domain:
//   sum_i log det(G_i + A_cand,i^T A_cand,i + lambda I)
// with the candidate's Jacobian included only for vertices it actually sees.
// The log of the determinant product is a strictly monotone transform, so the
// argmax over candidates is unchanged while staying finite for thousands of
// vertices.
inline double geometry_fitness(const FitnessContext& ctx, const CameraView& cand) {
  const std::vector<uint8_t> w = candidate_visibility(ctx, cand);
  double jd = ctx.base_sum;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!w[i]) continue;
    const Vec3& v = ctx.scene->mesh.vertices[ctx.eval_vertices[i]];
    const Mat23 a = colinearity_jacobian(cand, v);
    const Mat3 g = ctx.info[i] + a.transpose() * a;
    jd += detail::logdet_regularized(g, ctx.options.lambda) - ctx.base_logdet[i];
  }
  return jd;
}

// Returns a context with the camera committed as placed view K+1: counts,
// weights, and information matrices updated for everything it sees.
inline FitnessContext commit_view(const FitnessContext& ctx, const CameraView& cam) {
  FitnessContext next = ctx;
  detail::accumulate_view(next, cam, candidate_visibility(next, cam));
  return next;
}

// ---------------------------------------------------------------------------
// Heuristic selection
// ---------------------------------------------------------------------------

enum class Heuristic { visibility, geometry };

inline double heuristic_score(const FitnessContext& ctx, const CameraView& cam,
                              Heuristic heuristic) {
  return heuristic == Heuristic::visibility ? visibility_fitness(ctx, cam)
                                            : geometry_fitness(ctx, cam);
}

inline std::string to_string(Heuristic heuristic) {
  return heuristic == Heuristic::visibility ? "visibility" : "geometry";
}

inline Heuristic parse_heuristic(const std::string& name) {
  if (name == "visibility" || name == "jv") return Heuristic::visibility;
  if (name == "geometry" || name == "jd") return Heuristic::geometry;
  throw std::invalid_argument("unknown heuristic: " + name);
}

// ---------------------------------------------------------------------------
// Fitness trace CSV: iteration,candidate_id,J_v,logJ_d
// ---------------------------------------------------------------------------

class FitnessTraceWriter {
 public:
  explicit FitnessTraceWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot write fitness trace: " + path);
    out_ << "iteration,candidate_id,J_v,logJ_d\n";
  }

  // Safe to call from parallel candidate evaluation; rows stay whole.
  void row(int iteration, int candidate_id, double jv, double log_jd) {
    const std::lock_guard<std::mutex> lock(mutex_);
    out_ << iteration << ',' << candidate_id << ',' << detail::format_double(jv)
         << ',' << detail::format_double(log_jd) << '\n';
  }

  void flush() {
    const std::lock_guard<std::mutex> lock(mutex_);
    out_.flush();
  }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace nbv
