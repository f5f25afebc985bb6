#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "condex/oracle.hpp"
#include "condex/problems.hpp"

using namespace condex;

namespace {

QuadMatrix hand_matrix(const Eigen::MatrixXd& entries) {
  QuadMatrix q;
  q.entries = entries;
  q.x_grid = Grid1D::uniform(0.0, 1.0, static_cast<int>(entries.rows()));
  q.y_grid = Grid1D::uniform(0.0, 1.0, static_cast<int>(entries.cols()));
  return q;
}

}  // namespace

TEST_CASE("uniform grid and validation") {
  const Grid1D g = Grid1D::uniform(-2.0, 3.0, 11);
  CHECK(g.size() == 11);
  CHECK(g.lo() == -2.0);
  CHECK(g.hi() == 3.0);
  CHECK(g.points(1) == Catch::Approx(-1.5));
  CHECK_NOTHROW(g.validate());

  CHECK_THROWS_AS(Grid1D::uniform(1.0, 1.0, 5), ConfigError);
  CHECK_THROWS_AS(Grid1D::uniform(0.0, 1.0, 1), ConfigError);

  Grid1D bad;
  bad.points.resize(3);
  bad.points << 0.0, 2.0, 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("interpolation is exact on linear data and clamps outside") {
  const Grid1D g = Grid1D::uniform(0.0, 4.0, 5);
  Eigen::VectorXd v(5);
  v << 1.0, 3.0, 5.0, 7.0, 9.0;  // 1 + 2x
  CHECK(g.interpolate(v, 1.7) == Catch::Approx(1.0 + 2.0 * 1.7));
  CHECK(g.interpolate(v, 0.0) == 1.0);
  CHECK(g.interpolate(v, -5.0) == 1.0);
  CHECK(g.interpolate(v, 99.0) == 9.0);
  Eigen::VectorXd wrong(3);
  CHECK_THROWS_AS(g.interpolate(wrong, 1.0), ShapeError);
}

TEST_CASE("clamped stencil rows are nonnegative averages") {
  const Ar1Model model{0.5, 0.0, 1.0};
  const Grid1D y = Grid1D::uniform(-6.0, 6.0, 401);
  const Grid1D x = Grid1D::uniform(-2.0, 2.0, 21);
  const QuadMatrix q = build_cdf_matrix(model.cond_cdf(), y, x, /*clamp=*/true);
  CHECK(q.entries.minCoeff() >= 0.0);
  for (int i = 0; i < q.entries.rows(); ++i) {
    CHECK(std::fabs(q.entries.row(i).sum() - 1.0) < 1e-12);
  }
  // Constant functions are reproduced exactly.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
  const Eigen::VectorXd u = cond_expectation_numeric(q, ones);
  CHECK((u.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("stencil quadrature matches Gaussian moments") {
  const Ar1Model model{0.5, 0.3, 1.0};
  const Grid1D y = Grid1D::uniform(-10.0, 10.0, 4001);
  const Grid1D x = Grid1D::uniform(-2.0, 2.0, 41);
  const QuadMatrix q = build_cdf_matrix(model.cond_cdf(), y, x, /*clamp=*/true);

  Eigen::VectorXd d1(y.size()), d2(y.size());
  for (int j = 0; j < y.size(); ++j) {
    d1(j) = y.points(j);
    d2(j) = y.points(j) * y.points(j);
  }
  const Eigen::VectorXd m1 = cond_expectation_numeric(q, d1);
  const Eigen::VectorXd m2 = cond_expectation_numeric(q, d2);
  for (int i = 0; i < x.size(); ++i) {
    const double mean = model.r * x.points(i) + model.m;
    CHECK(m1(i) == Catch::Approx(mean).margin(1e-4));
    CHECK(m2(i) == Catch::Approx(mean * mean + model.s).margin(1e-3));
  }
}

TEST_CASE("pdf trapezoid quadrature matches the stencil") {
  const Ar1Model model{0.7, 0.0, 0.5};
  const Grid1D y = Grid1D::uniform(-8.0, 8.0, 2001);
  const Grid1D x = Grid1D::uniform(-1.5, 1.5, 11);
  const QuadMatrix qc = build_cdf_matrix(model.cond_cdf(), y, x, /*clamp=*/true);
  const QuadMatrix qp = build_pdf_matrix(model.cond_pdf(), y, x);

  Eigen::VectorXd d(y.size());
  for (int j = 0; j < y.size(); ++j) d(j) = std::tanh(y.points(j));
  const Eigen::VectorXd a = cond_expectation_numeric(qc, d);
  const Eigen::VectorXd b = cond_expectation_numeric(qp, d);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("tail mass is recorded and enforceable") {
  const Ar1Model model{0.0, 0.0, 1.0};
  const Grid1D x = Grid1D::uniform(-1.0, 1.0, 5);

  const QuadMatrix wide = build_cdf_matrix(model.cond_cdf(), Grid1D::uniform(-8.0, 8.0, 801), x);
  CHECK(wide.tail_mass_low < 1e-6);
  CHECK(wide.tail_mass_high < 1e-6);
  CHECK_NOTHROW(wide.require_tail_mass(1e-4));

  const QuadMatrix narrow = build_cdf_matrix(model.cond_cdf(), Grid1D::uniform(-1.0, 1.0, 101), x);
  CHECK(narrow.tail_mass_high > 0.1);
  CHECK_THROWS_AS(narrow.require_tail_mass(1e-4), TailMassWarning);
  // Clamping keeps the rows stochastic even with heavy tails.
  for (int i = 0; i < narrow.entries.rows(); ++i) {
    CHECK(std::fabs(narrow.entries.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("quadrature rejects mismatched integrand length") {
  const QuadMatrix q = hand_matrix(Eigen::MatrixXd::Identity(4, 4));
  Eigen::VectorXd d(3);
  CHECK_THROWS_AS(cond_expectation_numeric(q, d), ShapeError);
}

TEST_CASE("fixed point of a linear system matches the direct solve") {
  // U = F (a U + B) has the closed form U = (I - a F)^{-1} F B.
  const int n = 6;
  Eigen::MatrixXd f(n, n);
  Rng rng(77);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) f(i, j) = rng.uniform();
    f.row(i) /= f.row(i).sum();
  }
  QuadMatrix q = hand_matrix(f);
  const double a = 0.7;
  Eigen::VectorXd bvals(n);
  for (int i = 0; i < n; ++i) bvals(i) = std::sin(3.0 * q.y_grid.points(i));
  SystemFn h = [&](double y, const std::vector<double>& u) {
    return a * u[0] + q.y_grid.interpolate(bvals, y);
  };
  FixedPointResult res = fixed_point_solve({q}, {h}, {Eigen::VectorXd::Zero(n)}, 300);

  const Eigen::VectorXd exact =
      (Eigen::MatrixXd::Identity(n, n) - a * f).lu().solve(f * bvals);
  CHECK((res.u[0] - exact).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.residuals.size() == 300);
  // Residuals of an a-contraction shrink geometrically.
  CHECK(res.residuals[20] < std::pow(a, 10) * (res.residuals[0] + 1e-30));
}

TEST_CASE("fixed point solver validates shapes and finiteness") {
  const QuadMatrix q = hand_matrix(Eigen::MatrixXd::Identity(3, 3));
  SystemFn h = [](double, const std::vector<double>& u) { return u[0]; };
  CHECK_THROWS_AS(fixed_point_solve({}, {}, {}, 10), ShapeError);
  CHECK_THROWS_AS(fixed_point_solve({q}, {h, h}, {Eigen::VectorXd::Zero(3)}, 10), ShapeError);
  CHECK_THROWS_AS(fixed_point_solve({q}, {h}, {Eigen::VectorXd::Zero(4)}, 10), ShapeError);
  const QuadMatrix rect = hand_matrix(Eigen::MatrixXd::Zero(3, 4));
  CHECK_THROWS_AS(fixed_point_solve({rect}, {h}, {Eigen::VectorXd::Zero(3)}, 10), ShapeError);

  SystemFn blow_up = [](double, const std::vector<double>&) {
    return std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(fixed_point_solve({q}, {blow_up}, {Eigen::VectorXd::Zero(3)}, 10),
                  NonFiniteIterate);
}

TEST_CASE("two coupled systems iterate jointly") {
  // U1 = F (0.5 U2 + 1), U2 = F (0.5 U1) with F stochastic has the unique
  // fixed point U1 = 4/3, U2 = 2/3 (constant vectors).
  const int n = 4;
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  QuadMatrix q = hand_matrix(f);
  SystemFn h1 = [](double, const std::vector<double>& u) { return 0.5 * u[1] + 1.0; };
  SystemFn h2 = [](double, const std::vector<double>& u) { return 0.5 * u[0]; };
  FixedPointResult res = fixed_point_solve({q, q}, {h1, h2},
                                           {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)},
                                           200);
  CHECK((res.u[0].array() - 4.0 / 3.0).abs().maxCoeff() < 1e-12);
  CHECK((res.u[1].array() - 2.0 / 3.0).abs().maxCoeff() < 1e-12);
}
