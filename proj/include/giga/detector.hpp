#pragma once

// The grouped fixed-point detector: damped coordinate updates driven by
// per-group projections, followed by per-symbol MPM decisions and recovery of
// the complex symbols.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "giga/errors.hpp"
#include "giga/exp_family.hpp"
#include "giga/m_projection.hpp"
#include "giga/system_model.hpp"

namespace giga {

enum class ProjectionMode { approximate, exact_oracle };

struct GigaConfig {
  int num_groups = 1;
  double damping = 0.3;     // convex weight on the fresh update
  int max_iters = 50;
  double tol = 1e-6;        // sup-norm change of the global coordinates
  ProjectionMode mode = ProjectionMode::approximate;
  std::optional<Eigen::MatrixXd> warm_start_theta0;
  bool record_decision_trace = false;
};

struct GigaState {
  Eigen::MatrixXd theta0;               // global coordinates
  std::vector<Eigen::MatrixXd> theta_u; // per-group coordinates
  int iteration = 0;
  std::vector<double> trace;            // sup-norm change per iteration
  std::vector<Eigen::VectorXd> decision_trace;  // optional hard decisions
};

struct DetectionResult {
  Eigen::MatrixXd marginals;           // 2K x L approximate marginals
  Eigen::VectorXd real_decisions;      // alphabet points
  Eigen::VectorXcd complex_decisions;  // constellation points
  int iterations_used = 0;
  bool converged = false;
};

struct GigaOutput {
  DetectionResult result;
  GigaState state;
};

// Per-row argmax; ties resolve to the smallest alphabet index.
inline Eigen::VectorXd mpm_decide(const Eigen::MatrixXd& marginals,
                                  const Alphabet& alphabet) {
  if (marginals.cols() != alphabet.size()) {
    throw std::invalid_argument("mpm_decide: alphabet size mismatch");
  }
  Eigen::VectorXd out(marginals.rows());
  for (Eigen::Index r = 0; r < marginals.rows(); ++r) {
    int best = 0;
    for (int l = 1; l < alphabet.size(); ++l) {
      if (marginals(r, l) > marginals(r, best)) best = l;
    }
    out[r] = alphabet.points[best];
  }
  return out;
}

// Reassembles K complex symbols from the stacked [Re; Im] decisions.
inline Eigen::VectorXcd assemble_complex(const Eigen::VectorXd& real_decisions) {
  if (real_decisions.size() % 2 != 0) {
    throw std::invalid_argument("assemble_complex: length must be even");
  }
  const Eigen::Index k = real_decisions.size() / 2;
  Eigen::VectorXcd out(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out[i] = {real_decisions[i], real_decisions[k + i]};
  }
  return out;
}

inline void validate_config(const GigaConfig& cfg) {
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) {
    throw std::invalid_argument("giga config: damping must lie in (0, 1]");
  }
  if (cfg.max_iters < 1) {
    throw std::invalid_argument("giga config: max_iters must be >= 1");
  }
  if (!(cfg.tol > 0.0)) {
    throw std::invalid_argument("giga config: tolerance must be positive");
  }
}

// Runs the damped fixed-point iteration until the global coordinates settle
// or the iteration budget is exhausted. Group projections are computed in a
// fixed ascending group order, so results do not depend on scheduling.
inline GigaOutput run_giga(const RealSystem& sys, const GigaConfig& cfg) {
  validate_config(cfg);
  const Grouping grouping = make_grouping(sys, cfg.num_groups);
  const std::vector<GroupContext> contexts = make_group_contexts(sys, grouping);
  const int num_groups = cfg.num_groups;
  const Eigen::Index n = sys.symbols();
  const Eigen::Index coord_cols = sys.alphabet.size() - 1;

  GigaState st;
  if (cfg.warm_start_theta0) {
    if (cfg.warm_start_theta0->rows() != n || cfg.warm_start_theta0->cols() != coord_cols) {
      throw std::invalid_argument("giga config: warm start shape mismatch");
    }
    st.theta0 = *cfg.warm_start_theta0;
  } else {
    st.theta0 = Eigen::MatrixXd::Zero(n, coord_cols);
  }
  st.theta_u.assign(num_groups, Eigen::MatrixXd::Zero(n, coord_cols));

  std::vector<Eigen::MatrixXd> projected(num_groups);
  std::vector<ProjectionWorkspace> workspaces(num_groups);
  Eigen::MatrixXd xi_sum(n, coord_cols);
  Eigen::MatrixXd theta0_next(n, coord_cols);

  bool converged = false;
  for (int t = 0; t < cfg.max_iters && !converged; ++t) {
    for (int u = 0; u < num_groups; ++u) {
      if (cfg.mode == ProjectionMode::approximate) {
        approx_projection_into(contexts[u], st.theta_u[u], projected[u], workspaces[u]);
      } else {
        projected[u] = exact_projection(contexts[u], st.theta_u[u]);
      }
    }
    xi_sum.setZero();
    for (int u = 0; u < num_groups; ++u) {
      xi_sum += projected[u] - st.theta_u[u];
    }
    theta0_next = cfg.damping * xi_sum + (1.0 - cfg.damping) * st.theta0;
    for (int u = 0; u < num_groups; ++u) {
      st.theta_u[u] = cfg.damping * (xi_sum - projected[u] + st.theta_u[u]) +
                      (1.0 - cfg.damping) * st.theta_u[u];
    }
    const double delta = (theta0_next - st.theta0).cwiseAbs().maxCoeff();
    st.theta0.swap(theta0_next);
    st.iteration = t + 1;
    st.trace.push_back(delta);
    if (!st.theta0.allFinite()) {
      throw DivergenceError(st.iteration,
                            "giga: non-finite coordinates at iteration " +
                                std::to_string(st.iteration));
    }
    if (cfg.record_decision_trace) {
      st.decision_trace.push_back(
          mpm_decide(theta_to_marginals(st.theta0, sys.prior_nat), sys.alphabet));
    }
    if (delta < cfg.tol) converged = true;
  }

  DetectionResult res;
  res.marginals = theta_to_marginals(st.theta0, sys.prior_nat);
  res.real_decisions = mpm_decide(res.marginals, sys.alphabet);
  res.complex_decisions = assemble_complex(res.real_decisions);
  res.iterations_used = st.iteration;
  res.converged = converged;
  return {std::move(res), std::move(st)};
}

}  // namespace giga
