#pragma once

// Exponential-family coordinates on the product manifold of fully factorized
// distributions over a finite alphabet: coordinate/probability maps, per-symbol
// moments, free energy, KL divergence, and the exhaustive-enumeration posterior
// used as the small-instance correctness oracle.
//
// Coordinate layout: theta and d are (2K) x (L-1) arrays; row k parameterizes
// symbol k relative to the first alphabet point, whose coefficient is fixed
// at zero.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "giga/errors.hpp"
#include "giga/system_model.hpp"

namespace giga {

// Exhaustive enumeration is refused above this many joint states.
inline constexpr std::int64_t kEnumerationCap = std::int64_t{1} << 20;

struct MomentPair {
  Eigen::VectorXd mean;  // per-symbol mean
  Eigen::VectorXd var;   // per-symbol variance
};

namespace detail {

inline void check_coordinate_shapes(const Eigen::MatrixXd& theta,
                                    const Eigen::MatrixXd& d, const char* where) {
  if (theta.rows() != d.rows() || theta.cols() != d.cols()) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch between theta and d");
  }
  if (theta.cols() < 1) {
    throw std::invalid_argument(std::string(where) + ": need at least a binary alphabet");
  }
}

}  // namespace detail

// Row-wise softmax of (0, d+theta), computed with max subtraction so large
// coordinates saturate instead of overflowing.
inline Eigen::MatrixXd theta_to_marginals(const Eigen::MatrixXd& theta,
                                          const Eigen::MatrixXd& d) {
  detail::check_coordinate_shapes(theta, d, "theta_to_marginals");
  const Eigen::Index rows = theta.rows();
  const Eigen::Index num_points = theta.cols() + 1;
  Eigen::MatrixXd m(rows, num_points);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double peak = 0.0;
    for (Eigen::Index l = 1; l < num_points; ++l) {
      peak = std::max(peak, d(r, l - 1) + theta(r, l - 1));
    }
    double total = std::exp(-peak);
    m(r, 0) = total;
    for (Eigen::Index l = 1; l < num_points; ++l) {
      const double e = std::exp(d(r, l - 1) + theta(r, l - 1) - peak);
      m(r, l) = e;
      total += e;
    }
    m.row(r) /= total;
  }
  return m;
}

// Left inverse of theta_to_marginals on the open simplex.
inline Eigen::MatrixXd marginals_to_theta(const Eigen::MatrixXd& marginals,
                                          const Eigen::MatrixXd& d) {
  if (marginals.rows() != d.rows() || marginals.cols() != d.cols() + 1) {
    throw std::invalid_argument("marginals_to_theta: shape mismatch");
  }
  if ((marginals.array() <= kProbabilityFloor).any()) {
    throw NumericalError("marginals_to_theta: marginal probability underflow");
  }
  Eigen::MatrixXd theta(d.rows(), d.cols());
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    const double log_p0 = std::log(marginals(r, 0));
    for (Eigen::Index l = 1; l < marginals.cols(); ++l) {
      theta(r, l - 1) = std::log(marginals(r, l)) - log_p0 - d(r, l - 1);
    }
  }
  return theta;
}

// Per-symbol mean and variance of the factorized distribution at (theta, d).
inline MomentPair marginal_moments(const Eigen::MatrixXd& theta,
                                   const Eigen::MatrixXd& d,
                                   const Alphabet& alphabet) {
  detail::check_coordinate_shapes(theta, d, "marginal_moments");
  if (alphabet.size() != theta.cols() + 1) {
    throw std::invalid_argument("marginal_moments: alphabet size mismatch");
  }
  const Eigen::MatrixXd m = theta_to_marginals(theta, d);
  MomentPair out;
  out.mean = m * alphabet.points;
  const Eigen::VectorXd second = m * alphabet.points.cwiseAbs2();
  out.var = (second - out.mean.cwiseAbs2()).cwiseMax(0.0);
  return out;
}

// Log normalization factor ln(1 + sum_l exp(d_l + theta_l)) for one symbol.
inline double free_energy(const Eigen::VectorXd& theta_row,
                          const Eigen::VectorXd& d_row) {
  if (theta_row.size() != d_row.size()) {
    throw std::invalid_argument("free_energy: shape mismatch");
  }
  double peak = 0.0;
  for (Eigen::Index l = 0; l < theta_row.size(); ++l) {
    peak = std::max(peak, d_row[l] + theta_row[l]);
  }
  double total = std::exp(-peak);
  for (Eigen::Index l = 0; l < theta_row.size(); ++l) {
    total += std::exp(d_row[l] + theta_row[l] - peak);
  }
  return peak + std::log(total);
}

// sum p ln(p/q) with the 0 ln 0 := 0 convention; q must be strictly positive.
inline double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: support mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) throw std::invalid_argument("kl_divergence: negative mass");
    if (q[i] <= 0.0) throw std::invalid_argument("kl_divergence: q must be positive");
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

struct ExactPosterior {
  // Joint probabilities over all |S|^n symbol vectors, lexicographic with the
  // last symbol's index varying fastest.
  Eigen::VectorXd joint;
  Eigen::MatrixXd marginals;  // n x L
};

namespace detail {

inline std::int64_t joint_state_count(int alphabet_size, Eigen::Index symbols) {
  std::int64_t states = 1;
  for (Eigen::Index i = 0; i < symbols; ++i) {
    states *= alphabet_size;
    if (states > kEnumerationCap) return -1;
  }
  return states;
}

// Exhaustive normalization and marginalization of
//   w(s) = exp{ sum_k coef(k, s_k) - ||y - G s||^2 / (2 noise_var) }
// over all joint assignments, visited in a fixed lexicographic order.
// coef has one row per symbol and one column per alphabet point.
inline ExactPosterior enumerate_joint(const Eigen::MatrixXd& coef,
                                      const Eigen::MatrixXd& G,
                                      const Eigen::VectorXd& y, double noise_var,
                                      const Alphabet& alphabet) {
  const Eigen::Index n = G.cols();
  const int num_points = alphabet.size();
  if (coef.rows() != n || coef.cols() != num_points) {
    throw std::invalid_argument("enumerate_joint: coefficient shape mismatch");
  }
  if (G.rows() != y.size()) {
    throw std::invalid_argument("enumerate_joint: observation shape mismatch");
  }
  if (noise_var <= 0.0) {
    throw std::invalid_argument("enumerate_joint: noise variance must be positive");
  }
  const std::int64_t states = joint_state_count(num_points, n);
  if (states < 0) {
    throw std::invalid_argument("enumerate_joint: state space exceeds enumeration cap");
  }
  const Eigen::VectorXd& pts = alphabet.points;

  std::vector<int> idx(n, 0);
  Eigen::VectorXd gs = G * Eigen::VectorXd::Constant(n, pts[0]);
  double coef_sum = coef.col(0).sum();
  const double inv_two_var = 1.0 / (2.0 * noise_var);

  Eigen::VectorXd log_w(states);
  for (std::int64_t t = 0; t < states; ++t) {
    // Periodic recompute bounds the drift of the incremental updates.
    if (t > 0 && (t & 0xFFF) == 0) {
      Eigen::VectorXd s(n);
      coef_sum = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        s[k] = pts[idx[k]];
        coef_sum += coef(k, idx[k]);
      }
      gs = G * s;
    }
    log_w[t] = coef_sum - (y - gs).squaredNorm() * inv_two_var;
    if (t + 1 < states) {
      Eigen::Index k = n - 1;
      while (true) {
        const int old = idx[k];
        if (old + 1 < num_points) {
          idx[k] = old + 1;
          gs += G.col(k) * (pts[old + 1] - pts[old]);
          coef_sum += coef(k, old + 1) - coef(k, old);
          break;
        }
        idx[k] = 0;
        gs += G.col(k) * (pts[0] - pts[old]);
        coef_sum += coef(k, 0) - coef(k, old);
        --k;
      }
    }
  }

  ExactPosterior out;
  const double peak = log_w.maxCoeff();
  out.joint = (log_w.array() - peak).exp();
  out.joint /= out.joint.sum();

  out.marginals = Eigen::MatrixXd::Zero(n, num_points);
  std::fill(idx.begin(), idx.end(), 0);
  for (std::int64_t t = 0; t < states; ++t) {
    for (Eigen::Index k = 0; k < n; ++k) {
      out.marginals(k, idx[k]) += out.joint[t];
    }
    if (t + 1 < states) {
      Eigen::Index k = n - 1;
      while (idx[k] + 1 == num_points) {
        idx[k] = 0;
        --k;
      }
      ++idx[k];
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    out.marginals.row(k) /= out.marginals.row(k).sum();
  }
  return out;
}

}  // namespace detail

// Exact posterior over all joint symbol vectors, proportional to
// prior x Gaussian likelihood. Refuses instances above the enumeration cap.
inline ExactPosterior exact_posterior(const RealSystem& sys) {
  const Eigen::Index n = sys.symbols();
  const int num_points = sys.alphabet.size();
  Eigen::MatrixXd coef(n, num_points);
  coef.col(0).setZero();
  coef.rightCols(num_points - 1) = sys.prior_nat;
  return detail::enumerate_joint(coef, sys.G, sys.y, sys.noise_var, sys.alphabet);
}

}  // namespace giga
