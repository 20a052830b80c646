#pragma once

// Real-valued lifting of the complex uplink model, square-QAM component
// alphabets, prior natural parameters, and the uniform grouping of the
// received-signal components.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "giga/errors.hpp"

namespace giga {

// Probabilities are clamped to this before any logarithm so natural
// parameters stay finite for user-supplied near-zero priors.
inline constexpr double kProbabilityFloor = 1e-300;

// Real PAM levels shared by the I and Q components of a square QAM
// constellation. Points are strictly increasing, symmetric about zero, and
// scaled so the induced complex constellation has unit average power
// (mean of squared points = 1/2).
struct Alphabet {
  Eigen::VectorXd points;

  int size() const { return static_cast<int>(points.size()); }
  double max_abs() const { return points.cwiseAbs().maxCoeff(); }

  // Index of the closest point; exact midpoints resolve to the smaller index.
  int nearest_index(double x) const {
    int best = 0;
    double best_dist = std::abs(x - points[0]);
    for (int i = 1; i < size(); ++i) {
      const double dist = std::abs(x - points[i]);
      if (dist < best_dist) {
        best = i;
        best_dist = dist;
      }
    }
    return best;
  }
};

inline bool is_perfect_square(int n) {
  if (n < 0) return false;
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n;
}

inline Alphabet make_alphabet(int mod_order) {
  if (mod_order < 4 || !is_perfect_square(mod_order)) {
    throw std::invalid_argument(
        "make_alphabet: modulation order must be a perfect square >= 4");
  }
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(mod_order))));
  Eigen::VectorXd levels(side);
  for (int i = 0; i < side; ++i) levels[i] = 2 * i - (side - 1);
  const double mean_square = levels.squaredNorm() / side;
  Alphabet a;
  a.points = levels / std::sqrt(2.0 * mean_square);
  return a;
}

// Complex narrowband transmission model: received = channel * symbols + noise.
struct ComplexSystem {
  Eigen::MatrixXcd channel;   // N_r x K
  Eigen::VectorXcd received;  // N_r
  double noise_var = 1.0;     // complex noise variance per antenna
  int mod_order = 4;          // square QAM order
};

// Real counterpart: y = G s + z with z ~ N(0, noise_var I).
// G carries the block structure [Re, -Im; Im, Re] when built by lift_to_real.
struct RealSystem {
  Eigen::MatrixXd G;          // 2N_r x 2K
  Eigen::VectorXd y;          // 2N_r
  double noise_var = 0.5;     // per real component
  Alphabet alphabet;
  Eigen::MatrixXd prior_nat;  // 2K x (L-1) log-ratios vs. the first point

  Eigen::Index observations() const { return G.rows(); }   // 2N_r
  Eigen::Index symbols() const { return G.cols(); }        // 2K
  Eigen::Index users() const { return G.cols() / 2; }      // K
};

// Per-symbol natural parameters d(k, l) = ln(p_k(point l) / p_k(point 0)).
// `priors` holds one probability row per real symbol component.
inline Eigen::MatrixXd prior_natural_params(const Eigen::MatrixXd& priors) {
  const Eigen::Index rows = priors.rows();
  const Eigen::Index num_points = priors.cols();
  if (rows < 1 || num_points < 2) {
    throw std::invalid_argument("prior_natural_params: need >=1 row and >=2 points");
  }
  Eigen::MatrixXd d(rows, num_points - 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if ((priors.row(r).array() <= 0.0).any()) {
      throw std::invalid_argument("prior_natural_params: probabilities must be positive");
    }
    if (std::abs(priors.row(r).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("prior_natural_params: each prior row must sum to 1");
    }
    const double p0 = std::max(priors(r, 0), kProbabilityFloor);
    for (Eigen::Index l = 1; l < num_points; ++l) {
      d(r, l - 1) = std::log(std::max(priors(r, l), kProbabilityFloor) / p0);
    }
  }
  return d;
}

// Stacks a complex vector as [Re; Im].
inline Eigen::VectorXd lift_complex(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

// Builds the real model from a complex one. `user_priors` holds one row per
// complex user over the component alphabet; the same row is applied to the
// real and imaginary components (product-form QAM priors).
inline RealSystem lift_to_real(const ComplexSystem& sys,
                               const Eigen::MatrixXd& user_priors) {
  const Eigen::Index n_r = sys.channel.rows();
  const Eigen::Index k = sys.channel.cols();
  if (n_r < 1 || k < 1) {
    throw std::invalid_argument("lift_to_real: channel must be at least 1x1");
  }
  if (sys.received.size() != n_r) {
    throw std::invalid_argument("lift_to_real: received length must match channel rows");
  }
  if (sys.noise_var <= 0.0) {
    throw std::invalid_argument("lift_to_real: noise variance must be positive");
  }
  RealSystem out;
  out.alphabet = make_alphabet(sys.mod_order);
  const int num_points = out.alphabet.size();
  if (user_priors.rows() != k || user_priors.cols() != num_points) {
    throw std::invalid_argument("lift_to_real: prior table must be K x sqrt(mod_order)");
  }

  out.G.resize(2 * n_r, 2 * k);
  out.G << sys.channel.real(), -sys.channel.imag(),
           sys.channel.imag(),  sys.channel.real();
  out.y = lift_complex(sys.received);
  out.noise_var = sys.noise_var / 2.0;

  Eigen::MatrixXd component_priors(2 * k, num_points);
  component_priors << user_priors, user_priors;
  out.prior_nat = prior_natural_params(component_priors);
  return out;
}

// Uniform-prior overload.
inline RealSystem lift_to_real(const ComplexSystem& sys) {
  const int num_points = make_alphabet(sys.mod_order).size();
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(
      sys.channel.cols(), num_points, 1.0 / num_points);
  return lift_to_real(sys, uniform);
}

// Uniform contiguous partition of the 2N_r real observations into
// `num_groups` equal slices, with the matching received / channel blocks.
struct Grouping {
  int num_groups = 1;
  Eigen::Index group_size = 0;  // rows per group
  std::vector<Eigen::VectorXd> sub_received;
  std::vector<Eigen::MatrixXd> sub_channels;

  // Zero-based half-open row range of group u.
  std::pair<Eigen::Index, Eigen::Index> index_range(int u) const {
    return {u * group_size, (u + 1) * group_size};
  }
};

inline Grouping make_grouping(const RealSystem& sys, int num_groups) {
  if (num_groups < 1) {
    throw std::invalid_argument("make_grouping: group count must be >= 1");
  }
  if (sys.observations() % num_groups != 0) {
    throw std::invalid_argument(
        "make_grouping: group count must divide the number of real observations");
  }
  Grouping g;
  g.num_groups = num_groups;
  g.group_size = sys.observations() / num_groups;
  g.sub_received.reserve(num_groups);
  g.sub_channels.reserve(num_groups);
  for (int u = 0; u < num_groups; ++u) {
    g.sub_received.push_back(sys.y.segment(u * g.group_size, g.group_size));
    g.sub_channels.push_back(sys.G.middleRows(u * g.group_size, g.group_size));
  }
  return g;
}

}  // namespace giga
