#pragma once

// Linear MMSE detection with per-component hard decision, the reference
// baseline for the iterative detector.

#include <Eigen/Dense>

#include "giga/detector.hpp"
#include "giga/errors.hpp"
#include "giga/system_model.hpp"

namespace giga {

struct LmmseResult {
  Eigen::VectorXd soft;                // (G'G + noise_var I)^{-1} G'y
  Eigen::VectorXd real_decisions;      // nearest alphabet points
  Eigen::VectorXcd complex_decisions;
};

inline LmmseResult lmmse_detect(const RealSystem& sys) {
  if (sys.noise_var <= 0.0) {
    throw std::invalid_argument("lmmse_detect: noise variance must be positive");
  }
  const Eigen::Index n = sys.symbols();
  Eigen::MatrixXd normal = sys.G.transpose() * sys.G;
  normal.diagonal().array() += sys.noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("lmmse_detect: normal matrix factorization failed");
  }
  LmmseResult out;
  out.soft = llt.solve(sys.G.transpose() * sys.y);
  out.real_decisions.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.real_decisions[i] = sys.alphabet.points[sys.alphabet.nearest_index(out.soft[i])];
  }
  out.complex_decisions = assemble_complex(out.real_decisions);
  return out;
}

}  // namespace giga
