#pragma once

// Projection of a group's auxiliary distribution onto the factorized manifold,
// two ways:
//
//  * exact_projection: exhaustive marginalization of the group likelihood
//    (exponential cost; the small-instance oracle), and
//  * approx_projection: a Gaussian surrogate for the interference-plus-noise
//    mixture, using its exact first two moments. The shared surrogate
//    covariance is inverted once per group and adapted to each symbol by a
//    rank-one downdate, so every symbol costs O(N_u^2) after the shared
//    inverse is available.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "giga/errors.hpp"
#include "giga/exp_family.hpp"
#include "giga/system_model.hpp"

namespace giga {

// Per-symbol variances are floored here before entering the surrogate
// covariance; a collapsed marginal would otherwise break its positive
// definiteness.
inline constexpr double kVarianceFloor = 1e-12;

// The rank-one downdate denominator 1 - v g'Ag below this value signals a
// near-singular surrogate covariance.
inline constexpr double kDowndateDenomFloor = 1e-12;

// Everything one group's projection needs: its observation slice, channel
// slice, the noise level, and the shared alphabet / prior coordinates.
struct GroupContext {
  Eigen::VectorXd y_u;    // N_u
  Eigen::MatrixXd G_u;    // N_u x 2K
  double noise_var = 0.0;
  Alphabet alphabet;
  Eigen::MatrixXd d;      // 2K x (L-1)
};

inline std::vector<GroupContext> make_group_contexts(const RealSystem& sys,
                                                     const Grouping& grouping) {
  std::vector<GroupContext> out;
  out.reserve(grouping.num_groups);
  for (int u = 0; u < grouping.num_groups; ++u) {
    out.push_back({grouping.sub_received[u], grouping.sub_channels[u],
                   sys.noise_var, sys.alphabet, sys.prior_nat});
  }
  return out;
}

// Real-multiplication counts of the two ways to build the shared inverse.
struct ComplexityEstimate {
  enum class Path { direct_inverse, woodbury };

  std::int64_t direct_mults = 0;    // invert the N_u x N_u covariance
  std::int64_t woodbury_mults = 0;  // invert a 2K x 2K system instead
  Path chosen = Path::direct_inverse;
};

inline ComplexityEstimate inversion_cost(std::int64_t num_users,
                                         std::int64_t group_rows) {
  if (num_users < 1 || group_rows < 1) {
    throw std::invalid_argument("inversion_cost: dimensions must be positive");
  }
  ComplexityEstimate c;
  const std::int64_t k = num_users;
  const std::int64_t nu = group_rows;
  c.direct_mults = nu * nu * nu + 2 * k * nu * nu;
  c.woodbury_mults = 8 * k * k * k + 8 * k * k * nu + 2 * k * nu * nu;
  c.chosen = c.direct_mults <= c.woodbury_mults
                 ? ComplexityEstimate::Path::direct_inverse
                 : ComplexityEstimate::Path::woodbury;
  return c;
}

namespace detail {

inline void check_shared_inverse_args(const Eigen::MatrixXd& G_u,
                                      const Eigen::VectorXd& v, double noise_var) {
  if (v.size() != G_u.cols()) {
    throw std::invalid_argument("shared inverse: variance length mismatch");
  }
  if (G_u.cols() % 2 != 0) {
    throw std::invalid_argument("shared inverse: expected 2K channel columns");
  }
  if (noise_var <= 0.0) {
    throw std::invalid_argument("shared inverse: noise variance must be positive");
  }
  if (v.size() > 0 && v.minCoeff() < kVarianceFloor) {
    throw std::invalid_argument("shared inverse: variances must be >= the floor");
  }
}

}  // namespace detail

// (G Diag(v) G' + noise_var I)^{-1} by direct SPD factorization.
inline Eigen::MatrixXd shared_inverse_direct(const Eigen::MatrixXd& G_u,
                                             const Eigen::VectorXd& v,
                                             double noise_var) {
  detail::check_shared_inverse_args(G_u, v, noise_var);
  const Eigen::Index nu = G_u.rows();
  Eigen::MatrixXd cov = G_u * v.asDiagonal() * G_u.transpose();
  cov.diagonal().array() += noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("shared inverse: covariance factorization failed");
  }
  return llt.solve(Eigen::MatrixXd::Identity(nu, nu));
}

// Same matrix via the Woodbury identity; the factored system is 2K x 2K.
inline Eigen::MatrixXd shared_inverse_woodbury(const Eigen::MatrixXd& G_u,
                                               const Eigen::VectorXd& v,
                                               double noise_var) {
  detail::check_shared_inverse_args(G_u, v, noise_var);
  Eigen::MatrixXd inner = G_u.transpose() * G_u / noise_var;
  inner += Eigen::MatrixXd(v.cwiseInverse().asDiagonal());
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("shared inverse: inner factorization failed");
  }
  Eigen::MatrixXd out = -(G_u * llt.solve(G_u.transpose())) / (noise_var * noise_var);
  out.diagonal().array() += 1.0 / noise_var;
  return out;
}

// Costs both routes and takes the cheaper one (direct on ties).
inline std::pair<ComplexityEstimate, Eigen::MatrixXd> build_shared_inverse(
    const Eigen::MatrixXd& G_u, const Eigen::VectorXd& v, double noise_var) {
  detail::check_shared_inverse_args(G_u, v, noise_var);
  const ComplexityEstimate cost = inversion_cost(G_u.cols() / 2, G_u.rows());
  Eigen::MatrixXd inv = cost.chosen == ComplexityEstimate::Path::direct_inverse
                            ? shared_inverse_direct(G_u, v, noise_var)
                            : shared_inverse_woodbury(G_u, v, noise_var);
  return {cost, std::move(inv)};
}

// Inverse of the rank-one downdated covariance (C - v g g')^{-1} given
// shared_inv = C^{-1}.
inline Eigen::MatrixXd sherman_morrison_inverse(const Eigen::MatrixXd& shared_inv,
                                                const Eigen::VectorXd& g, double v) {
  if (shared_inv.rows() != shared_inv.cols() || shared_inv.rows() != g.size()) {
    throw std::invalid_argument("sherman_morrison_inverse: shape mismatch");
  }
  const Eigen::VectorXd ag = shared_inv * g;
  const double denom = 1.0 - v * g.dot(ag);
  if (denom < kDowndateDenomFloor) {
    throw NumericalError("sherman_morrison_inverse: downdate denominator vanished");
  }
  return shared_inv + (v / denom) * (ag * ag.transpose());
}

// All per-group intermediates of the approximate projection, exposed for
// inspection and testing.
struct ProjectionWorkspace {
  MomentPair moments;            // per-symbol means and floored variances
  Eigen::MatrixXd residual_plus; // column k: y_u - G_u mu + g_k mu_k
  Eigen::MatrixXd shared_inv;    // inverse of the all-symbol surrogate covariance
  Eigen::VectorXd surrogate_mean;
  Eigen::VectorXd surrogate_var;
  ComplexityEstimate cost;
};

// Approximate projection via the Gaussian surrogate. Writes the projected
// coordinates into `theta_out` and reuses `ws` buffers across calls.
inline void approx_projection_into(const GroupContext& ctx,
                                   const Eigen::MatrixXd& theta_u,
                                   Eigen::MatrixXd& theta_out,
                                   ProjectionWorkspace& ws) {
  const Eigen::Index n = ctx.G_u.cols();
  const int num_points = ctx.alphabet.size();
  detail::check_coordinate_shapes(theta_u, ctx.d, "approx_projection");
  if (theta_u.rows() != n || theta_u.cols() + 1 != num_points) {
    throw std::invalid_argument("approx_projection: coordinate shape mismatch");
  }
  if (ctx.y_u.size() != ctx.G_u.rows()) {
    throw std::invalid_argument("approx_projection: observation shape mismatch");
  }

  ws.moments = marginal_moments(theta_u, ctx.d, ctx.alphabet);
  ws.moments.var = ws.moments.var.cwiseMax(kVarianceFloor);

  // One shared residual; each column adds its own symbol's contribution back.
  ws.residual_plus = ctx.G_u * ws.moments.mean.asDiagonal();
  ws.residual_plus.colwise() += (ctx.y_u - ctx.G_u * ws.moments.mean).eval();

  Eigen::MatrixXd shared;
  std::tie(ws.cost, shared) = build_shared_inverse(ctx.G_u, ws.moments.var, ctx.noise_var);
  ws.shared_inv = std::move(shared);

  ws.surrogate_mean.resize(n);
  ws.surrogate_var.resize(n);
  theta_out.resize(n, num_points - 1);

  const Eigen::VectorXd& pts = ctx.alphabet.points;
  Eigen::VectorXd ag(ctx.G_u.rows());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto g = ctx.G_u.col(k);
    if (g.squaredNorm() == 0.0) {
      // The group does not observe this symbol at all, so the projection
      // leaves its coordinates unchanged (infinite surrogate variance).
      ws.surrogate_var[k] = std::numeric_limits<double>::infinity();
      ws.surrogate_mean[k] = 0.0;
      theta_out.row(k) = theta_u.row(k);
      continue;
    }
    ag.noalias() = ws.shared_inv * g;
    const double q = g.dot(ag);
    const double denom = 1.0 - ws.moments.var[k] * q;
    if (denom < kDowndateDenomFloor) {
      throw NumericalError("approx_projection: near-singular surrogate covariance");
    }
    const double scale = 1.0 + (ws.moments.var[k] / denom) * q;
    const double g_cov_g = q * scale;               // g' (C - v g g')^{-1} g
    const double g_cov_a = ag.dot(ws.residual_plus.col(k)) * scale;
    if (g_cov_g <= 0.0) {
      throw NumericalError("approx_projection: non-positive surrogate variance");
    }
    const double tilde_v = 1.0 / g_cov_g;
    const double tilde_mu = tilde_v * g_cov_a;
    ws.surrogate_var[k] = tilde_v;
    ws.surrogate_mean[k] = tilde_mu;
    for (int l = 1; l < num_points; ++l) {
      theta_out(k, l - 1) =
          (pts[0] - pts[l]) * (pts[0] + pts[l] - 2.0 * tilde_mu) / (2.0 * tilde_v) +
          theta_u(k, l - 1);
    }
  }
}

inline std::pair<Eigen::MatrixXd, ProjectionWorkspace> approx_projection(
    const GroupContext& ctx, const Eigen::MatrixXd& theta_u) {
  Eigen::MatrixXd theta_out;
  ProjectionWorkspace ws;
  approx_projection_into(ctx, theta_u, theta_out, ws);
  return {std::move(theta_out), std::move(ws)};
}

// Exact projection by exhaustive marginalization of the group distribution;
// usable only within the enumeration cap.
inline Eigen::MatrixXd exact_projection(const GroupContext& ctx,
                                        const Eigen::MatrixXd& theta_u) {
  detail::check_coordinate_shapes(theta_u, ctx.d, "exact_projection");
  const Eigen::Index n = ctx.G_u.cols();
  const int num_points = ctx.alphabet.size();
  Eigen::MatrixXd coef(n, num_points);
  coef.col(0).setZero();
  coef.rightCols(num_points - 1) = ctx.d + theta_u;
  const ExactPosterior dist =
      detail::enumerate_joint(coef, ctx.G_u, ctx.y_u, ctx.noise_var, ctx.alphabet);
  return marginals_to_theta(dist.marginals, ctx.d);
}

}  // namespace giga
