#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>

#include "giga/channel_io.hpp"
#include "giga/rng.hpp"
#include "giga/system_model.hpp"

using namespace giga;

namespace {

ComplexSystem tiny_system(const Eigen::MatrixXcd& channel, const Eigen::VectorXcd& received,
                          double noise_var, int mod_order = 4) {
  ComplexSystem sys;
  sys.channel = channel;
  sys.received = received;
  sys.noise_var = noise_var;
  sys.mod_order = mod_order;
  return sys;
}

}  // namespace

TEST_CASE("alphabet levels are normalized and symmetric") {
  const Alphabet qpsk = make_alphabet(4);
  REQUIRE(qpsk.size() == 2);
  CHECK(qpsk.points[0] == Catch::Approx(-0.70711).margin(1e-5));
  CHECK(qpsk.points[1] == Catch::Approx(0.70711).margin(1e-5));

  // 16-QAM component levels are the odd integers over sqrt(10).
  const Alphabet qam16 = make_alphabet(16);
  REQUIRE(qam16.size() == 4);
  const double scale = 1.0 / std::sqrt(10.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(qam16.points[i] == Catch::Approx((2 * i - 3) * scale).margin(1e-15));
  }

  for (int order : {4, 16, 64, 256}) {
    const Alphabet a = make_alphabet(order);
    CHECK(a.points.cwiseAbs2().mean() == Catch::Approx(0.5).margin(1e-15));
    // symmetric: points + reverse(points) = 0 exactly
    for (int i = 0; i < a.size(); ++i) {
      CHECK(a.points[i] + a.points[a.size() - 1 - i] == 0.0);
    }
    for (int i = 1; i < a.size(); ++i) CHECK(a.points[i] > a.points[i - 1]);
  }
}

TEST_CASE("alphabet rejects bad modulation orders") {
  CHECK_THROWS_AS(make_alphabet(2), std::invalid_argument);
  CHECK_THROWS_AS(make_alphabet(8), std::invalid_argument);
  CHECK_THROWS_AS(make_alphabet(-4), std::invalid_argument);
}

TEST_CASE("nearest_index breaks ties toward the smaller index") {
  const Alphabet a = make_alphabet(16);
  CHECK(a.nearest_index(a.points[2]) == 2);
  const double midpoint = 0.5 * (a.points[1] + a.points[2]);
  CHECK(a.nearest_index(midpoint) == 1);
  CHECK(a.nearest_index(-100.0) == 0);
  CHECK(a.nearest_index(100.0) == 3);
}

TEST_CASE("lifting an identity channel reproduces the block structure") {
  Eigen::MatrixXcd g(1, 1);
  g << std::complex<double>(1.0, 0.0);
  Eigen::VectorXcd y(1);
  y << std::complex<double>(2.0, 3.0);
  const RealSystem rs = lift_to_real(tiny_system(g, y, 2.0));
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 0, 0, 1;
  CHECK((rs.G - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rs.y[0] == 2.0);
  CHECK(rs.y[1] == 3.0);
  CHECK(rs.noise_var == 1.0);
}

TEST_CASE("lifting a pure imaginary channel") {
  Eigen::MatrixXcd g(1, 1);
  g << std::complex<double>(0.0, 1.0);
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(1);
  const RealSystem rs = lift_to_real(tiny_system(g, y, 1.0));
  Eigen::MatrixXd expected(2, 2);
  expected << 0, -1, 1, 0;
  CHECK((rs.G - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lift commutes with complex multiplication") {
  CounterRng rng(42, 0, 0);
  Eigen::MatrixXcd g(2, 2);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) g(r, c) = {rng.next_gaussian(), rng.next_gaussian()};
  }
  const RealSystem rs = lift_to_real(tiny_system(g, Eigen::VectorXcd::Zero(2), 1.0));
  double max_err = 0.0;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXcd s(2);
    for (int k = 0; k < 2; ++k) s[k] = {rng.next_gaussian(), rng.next_gaussian()};
    const Eigen::VectorXd direct = rs.G * lift_complex(s);
    const Eigen::VectorXd via_complex = lift_complex(g * s);
    max_err = std::max(max_err, (direct - via_complex).cwiseAbs().maxCoeff());
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("lift validates its inputs") {
  Eigen::MatrixXcd g(1, 1);
  g << std::complex<double>(1.0, 0.0);
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(1);
  CHECK_THROWS_AS(lift_to_real(tiny_system(g, y, -1.0)), std::invalid_argument);
  CHECK_THROWS_AS(lift_to_real(tiny_system(g, y, 1.0, 8)), std::invalid_argument);

  Eigen::MatrixXd bad_priors(1, 2);
  bad_priors << 0.9, 0.2;  // does not sum to 1
  CHECK_THROWS_AS(lift_to_real(tiny_system(g, y, 1.0), bad_priors), std::invalid_argument);
}

TEST_CASE("per-user priors apply to both real components") {
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Identity(1, 1);
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(1);
  Eigen::MatrixXd priors(1, 2);
  priors << 0.25, 0.75;
  const RealSystem rs = lift_to_real(tiny_system(g, y, 1.0), priors);
  REQUIRE(rs.prior_nat.rows() == 2);
  CHECK(rs.prior_nat(0, 0) == Catch::Approx(std::log(3.0)).margin(1e-14));
  CHECK(rs.prior_nat(1, 0) == rs.prior_nat(0, 0));
}

TEST_CASE("prior natural parameters are log-ratios") {
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(3, 4, 0.25);
  CHECK(prior_natural_params(uniform).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd row(1, 4);
  row << 0.5, 0.25, 0.125, 0.125;
  const Eigen::MatrixXd d = prior_natural_params(row);
  CHECK(d(0, 0) == Catch::Approx(-0.693147).margin(1e-6));
  CHECK(d(0, 1) == Catch::Approx(-1.386294).margin(1e-6));
  CHECK(d(0, 2) == Catch::Approx(-1.386294).margin(1e-6));

  Eigen::MatrixXd with_zero(1, 2);
  with_zero << 1.0, 0.0;
  CHECK_THROWS_AS(prior_natural_params(with_zero), std::invalid_argument);
}

TEST_CASE("natural parameters round-trip through probability reconstruction") {
  CounterRng rng(3, 0, 0);
  Eigen::MatrixXd priors(4, 4);
  for (int r = 0; r < 4; ++r) {
    double total = 0.0;
    for (int c = 0; c < 4; ++c) {
      priors(r, c) = 0.05 + rng.next_double();
      total += priors(r, c);
    }
    priors.row(r) /= total;
  }
  const Eigen::MatrixXd d = prior_natural_params(priors);
  // Reconstruct p from d: softmax over (0, d).
  for (int r = 0; r < 4; ++r) {
    double denom = 1.0;
    for (int c = 0; c < 3; ++c) denom += std::exp(d(r, c));
    CHECK(1.0 / denom == Catch::Approx(priors(r, 0)).margin(1e-12));
    for (int c = 0; c < 3; ++c) {
      CHECK(std::exp(d(r, c)) / denom == Catch::Approx(priors(r, c + 1)).margin(1e-12));
    }
  }
}

TEST_CASE("grouping slices the model uniformly") {
  CounterRng rng(5, 0, 0);
  Eigen::MatrixXcd g(4, 2);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 2; ++c) g(r, c) = {rng.next_gaussian(), rng.next_gaussian()};
  }
  Eigen::VectorXcd y(4);
  for (int r = 0; r < 4; ++r) y[r] = {rng.next_gaussian(), rng.next_gaussian()};
  const RealSystem rs = lift_to_real(tiny_system(g, y, 1.0));

  const Grouping quads = make_grouping(rs, 4);  // 2N_r = 8 rows
  REQUIRE(quads.group_size == 2);
  for (int u = 0; u < 4; ++u) {
    const auto [first, last] = quads.index_range(u);
    CHECK(first == 2 * u);
    CHECK(last == 2 * (u + 1));
    CHECK((quads.sub_received[u] - rs.y.segment(first, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((quads.sub_channels[u] - rs.G.middleRows(first, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
  // Concatenating the slices reproduces y.
  Eigen::VectorXd rebuilt(8);
  for (int u = 0; u < 4; ++u) rebuilt.segment(2 * u, 2) = quads.sub_received[u];
  CHECK((rebuilt - rs.y).cwiseAbs().maxCoeff() == 0.0);

  const Grouping single = make_grouping(rs, 1);
  CHECK((single.sub_received[0] - rs.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((single.sub_channels[0] - rs.G).cwiseAbs().maxCoeff() == 0.0);

  // One row per group: the per-antenna special case.
  const Grouping rows = make_grouping(rs, 8);
  CHECK(rows.group_size == 1);
  CHECK(rows.sub_channels[3].rows() == 1);

  CHECK_THROWS_AS(make_grouping(rs, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_grouping(rs, 0), std::invalid_argument);
}

TEST_CASE("channel file round-trips and rejects malformed input") {
  CounterRng rng(9, 0, 0);
  Eigen::MatrixXcd channel(3, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) channel(r, c) = {rng.next_gaussian(), rng.next_gaussian()};
  }
  std::stringstream buf;
  write_channel(buf, channel);
  const Eigen::MatrixXcd back = read_channel(buf);
  CHECK((back - channel).cwiseAbs().maxCoeff() == 0.0);

  SECTION("entries may arrive out of order") {
    std::stringstream s;
    s << "nr=1 k=2\n1 2 0.5 -0.5\n1 1 1.0 2.0\n";
    const Eigen::MatrixXcd m = read_channel(s);
    CHECK(m(0, 0) == std::complex<double>(1.0, 2.0));
    CHECK(m(0, 1) == std::complex<double>(0.5, -0.5));
  }
  SECTION("duplicate entry") {
    std::stringstream s;
    s << "nr=1 k=2\n1 1 1 0\n1 1 2 0\n";
    CHECK_THROWS_AS(read_channel(s), std::invalid_argument);
  }
  SECTION("missing entries") {
    std::stringstream s;
    s << "nr=2 k=2\n1 1 1 0\n";
    CHECK_THROWS_AS(read_channel(s), std::invalid_argument);
  }
  SECTION("bad header") {
    std::stringstream s;
    s << "rows=2 cols=2\n";
    CHECK_THROWS_AS(read_channel(s), std::invalid_argument);
  }
  SECTION("index out of range") {
    std::stringstream s;
    s << "nr=1 k=1\n2 1 1 0\n";
    CHECK_THROWS_AS(read_channel(s), std::invalid_argument);
  }
  SECTION("trailing garbage") {
    std::stringstream s;
    s << "nr=1 k=1\n1 1 1 0\nleftover\n";
    CHECK_THROWS_AS(read_channel(s), std::invalid_argument);
  }
}
