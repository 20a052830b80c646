#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "giga/lmmse.hpp"
#include "giga/rng.hpp"
#include "giga/system_model.hpp"

using namespace giga;

TEST_CASE("identity channel shrinks the observation by half") {
  const Alphabet alphabet = make_alphabet(4);
  RealSystem sys;
  sys.alphabet = alphabet;
  sys.G = Eigen::MatrixXd::Identity(2, 2);
  sys.noise_var = 1.0;
  sys.prior_nat = Eigen::MatrixXd::Zero(2, 1);
  sys.y.resize(2);
  sys.y << alphabet.points[1], alphabet.points[0];

  const LmmseResult out = lmmse_detect(sys);
  CHECK((out.soft - sys.y / 2.0).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(out.real_decisions[0] == alphabet.points[1]);
  CHECK(out.real_decisions[1] == alphabet.points[0]);
  CHECK(out.complex_decisions[0] ==
        std::complex<double>(alphabet.points[1], alphabet.points[0]));
}

TEST_CASE("vanishing noise recovers the zero-forcing solution") {
  // A lifted unitary complex channel has orthonormal real columns.
  CounterRng rng(51, 0, 0);
  Eigen::MatrixXcd u(2, 2);
  const double phi = rng.next_double();
  u << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);

  const Alphabet alphabet = make_alphabet(4);
  Eigen::VectorXd truth(4);
  for (int j = 0; j < 4; ++j) truth[j] = alphabet.points[rng.next_index(2)];

  ComplexSystem cs;
  cs.channel = u;
  cs.noise_var = 1e-12;
  cs.mod_order = 4;
  Eigen::VectorXcd s(2);
  s << std::complex<double>(truth[0], truth[2]), std::complex<double>(truth[1], truth[3]);
  cs.received = u * s;  // noiseless observation

  const LmmseResult out = lmmse_detect(lift_to_real(cs));
  CHECK((out.soft - truth).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((out.real_decisions - truth).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solver output matches the explicit-inverse oracle") {
  CounterRng rng(53, 0, 0);
  double max_err = 0.0;
  for (int i = 0; i < 20; ++i) {
    RealSystem sys;
    sys.alphabet = make_alphabet(4);
    sys.G.resize(8, 4);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 4; ++c) sys.G(r, c) = rng.next_gaussian();
    }
    sys.y.resize(8);
    for (int r = 0; r < 8; ++r) sys.y[r] = rng.next_gaussian();
    sys.noise_var = 0.2 + rng.next_double();
    sys.prior_nat = Eigen::MatrixXd::Zero(4, 1);

    const LmmseResult out = lmmse_detect(sys);
    const Eigen::MatrixXd normal =
        sys.G.transpose() * sys.G +
        sys.noise_var * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::VectorXd oracle = normal.inverse() * sys.G.transpose() * sys.y;
    max_err = std::max(max_err, (out.soft - oracle).cwiseAbs().maxCoeff());

    // Decisions are always alphabet points.
    for (int j = 0; j < 4; ++j) {
      CHECK(sys.alphabet.nearest_index(out.real_decisions[j]) ==
            sys.alphabet.nearest_index(out.soft[j]));
      CHECK((out.real_decisions[j] == sys.alphabet.points[0] ||
             out.real_decisions[j] == sys.alphabet.points[1]));
    }
  }
  CHECK(max_err < 1e-10);
}

TEST_CASE("invalid noise variance is rejected") {
  RealSystem sys;
  sys.alphabet = make_alphabet(4);
  sys.G = Eigen::MatrixXd::Identity(2, 2);
  sys.y = Eigen::VectorXd::Zero(2);
  sys.prior_nat = Eigen::MatrixXd::Zero(2, 1);
  sys.noise_var = 0.0;
  CHECK_THROWS_AS(lmmse_detect(sys), std::invalid_argument);
}
