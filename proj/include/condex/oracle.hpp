#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "condex/errors.hpp"

namespace condex {

struct Grid1D {
  Eigen::VectorXd points;  // strictly increasing

  static Grid1D uniform(double lo, double hi, int n) {
    if (n < 2 || !(lo < hi)) throw ConfigError("grid needs n >= 2 and lo < hi");
    Grid1D g;
    g.points.resize(n);
    for (int i = 0; i < n; ++i) g.points(i) = lo + (hi - lo) * i / (n - 1);
    return g;
  }

  int size() const { return static_cast<int>(points.size()); }
  double lo() const { return points(0); }
  double hi() const { return points(points.size() - 1); }

  void validate() const {
    for (int i = 1; i < size(); ++i) {
      if (!(points(i) > points(i - 1)) || !std::isfinite(points(i))) {
        throw ConfigError("grid points must be finite and strictly increasing");
      }
    }
  }

  /// Linear interpolation, clamped to the grid ends.
  double interpolate(const Eigen::VectorXd& values, double x) const {
    if (values.size() != points.size()) throw ShapeError("interpolate: value/grid size mismatch");
    if (x <= lo()) return values(0);
    if (x >= hi()) return values(values.size() - 1);
    int hi_idx = 1;
    while (points(hi_idx) < x) ++hi_idx;
    const double t = (x - points(hi_idx - 1)) / (points(hi_idx) - points(hi_idx - 1));
    return (1.0 - t) * values(hi_idx - 1) + t * values(hi_idx);
  }
};

enum class QuadKind { CdfStencil, PdfTrapezoid };

/// m x n stencil matrix mapping sampled integrand values d(Y_j) to sampled
/// conditional expectations u(X_i). With boundary clamping the CDF-stencil
/// rows are nonnegative and sum to one, so F*D is a convex average of D.
struct QuadMatrix {
  Eigen::MatrixXd entries;
  Grid1D x_grid;
  Grid1D y_grid;
  QuadKind kind = QuadKind::CdfStencil;
  // Probability mass outside the y-grid before clamping, maximized over rows.
  double tail_mass_low = 0.0;
  double tail_mass_high = 0.0;

  void require_tail_mass(double tol = 1e-4) const {
    if (tail_mass_low > tol || tail_mass_high > tol) {
      throw TailMassWarning("mass outside y-grid: low " + std::to_string(tail_mass_low) +
                            ", high " + std::to_string(tail_mass_high) + " exceeds tolerance " +
                            std::to_string(tol));
    }
  }
};

using CondCdf = std::function<double(double y, double x)>;
using CondPdf = std::function<double(double y, double x)>;

/// Averaged forward/backward rectangle rule on the Stieltjes integral
/// int d(Y) dF(Y|x). With clamp the first/last CDF samples per row are set to
/// 0/1 before differencing, pushing any tail mass onto the edge columns.
inline QuadMatrix build_cdf_matrix(const CondCdf& cond_cdf, const Grid1D& y_grid,
                                   const Grid1D& x_grid, bool clamp = true) {
  y_grid.validate();
  x_grid.validate();
  const int m = x_grid.size();
  const int n = y_grid.size();
  if (n < 3) throw ConfigError("cdf stencil needs at least 3 y-grid points");

  QuadMatrix q;
  q.x_grid = x_grid;
  q.y_grid = y_grid;
  q.kind = QuadKind::CdfStencil;
  q.entries.resize(m, n);

  Eigen::VectorXd row(n);
  for (int i = 0; i < m; ++i) {
    const double x = x_grid.points(i);
    for (int j = 0; j < n; ++j) row(j) = cond_cdf(y_grid.points(j), x);
    q.tail_mass_low = std::max(q.tail_mass_low, row(0));
    q.tail_mass_high = std::max(q.tail_mass_high, 1.0 - row(n - 1));
    if (clamp) {
      row(0) = 0.0;
      row(n - 1) = 1.0;
    }
    q.entries(i, 0) = 0.5 * (row(1) - row(0));
    for (int j = 1; j < n - 1; ++j) q.entries(i, j) = 0.5 * (row(j + 1) - row(j - 1));
    q.entries(i, n - 1) = 0.5 * (row(n - 1) - row(n - 2));
  }
  return q;
}

/// Trapezoidal rule on int d(Y) f(Y|x) dY, reorganized as a matrix acting on
/// the sampled d values.
inline QuadMatrix build_pdf_matrix(const CondPdf& cond_pdf, const Grid1D& y_grid,
                                   const Grid1D& x_grid) {
  y_grid.validate();
  x_grid.validate();
  const int m = x_grid.size();
  const int n = y_grid.size();

  QuadMatrix q;
  q.x_grid = x_grid;
  q.y_grid = y_grid;
  q.kind = QuadKind::PdfTrapezoid;
  q.entries.setZero(m, n);

  for (int i = 0; i < m; ++i) {
    const double x = x_grid.points(i);
    for (int j = 0; j < n; ++j) {
      const double f = cond_pdf(y_grid.points(j), x);
      if (j > 0) q.entries(i, j) += 0.5 * f * (y_grid.points(j) - y_grid.points(j - 1));
      if (j < n - 1) q.entries(i, j) += 0.5 * f * (y_grid.points(j + 1) - y_grid.points(j));
    }
    // Row-sum deficit doubles as the tail-mass report for pdf quadrature.
    const double deficit = 1.0 - q.entries.row(i).sum();
    if (deficit > 0.0) q.tail_mass_low = std::max(q.tail_mass_low, deficit);
    if (deficit < 0.0) q.tail_mass_high = std::max(q.tail_mass_high, -deficit);
  }
  return q;
}

inline Eigen::VectorXd cond_expectation_numeric(const QuadMatrix& f, const Eigen::VectorXd& d) {
  if (d.size() != f.entries.cols()) {
    throw ShapeError("cond_expectation_numeric: " + std::to_string(d.size()) +
                     " d-values vs matrix with " + std::to_string(f.entries.cols()) + " columns");
  }
  return f.entries * d;
}

/// h^j(y, u^1..u^K) evaluated elementwise along the common grid.
using SystemFn = std::function<double(double y, const std::vector<double>& u)>;

struct FixedPointResult {
  std::vector<Eigen::VectorXd> u;  // K solution vectors on the grid
  std::vector<double> residuals;   // sup-norm change per iteration
};

/// Jacobi iteration U^j_t = F^j H^j(U^1_{t-1},...,U^K_{t-1}) on a common
/// square grid (Y and X sampled at the same points).
inline FixedPointResult fixed_point_solve(const std::vector<QuadMatrix>& f_list,
                                          const std::vector<SystemFn>& h_list,
                                          const std::vector<Eigen::VectorXd>& u0_list,
                                          int iters) {
  const std::size_t k = f_list.size();
  if (h_list.size() != k || u0_list.size() != k) {
    throw ShapeError("fixed_point_solve: F, h, U0 counts differ");
  }
  if (k == 0) throw ShapeError("fixed_point_solve: empty system");
  const int n = static_cast<int>(f_list[0].entries.rows());
  for (const auto& f : f_list) {
    if (f.entries.rows() != n || f.entries.cols() != n) {
      throw ShapeError("fixed_point_solve: all matrices must be square on the common grid");
    }
  }
  for (const auto& u0 : u0_list) {
    if (u0.size() != n) throw ShapeError("fixed_point_solve: U0 size does not match grid");
  }

  FixedPointResult res;
  res.u = u0_list;
  res.residuals.reserve(iters);
  std::vector<Eigen::VectorXd> h_vals(k, Eigen::VectorXd(n));
  std::vector<double> u_at(k);

  for (int t = 0; t < iters; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (int i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) u_at[l] = res.u[l](i);
        h_vals[j](i) = h_list[j](f_list[j].y_grid.points(i), u_at);
      }
    }
    double residual = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      Eigen::VectorXd next = f_list[j].entries * h_vals[j];
      if (!next.allFinite()) {
        throw NonFiniteIterate("fixed-point iterate non-finite at iteration " +
                               std::to_string(t));
      }
      residual = std::max(residual, (next - res.u[j]).cwiseAbs().maxCoeff());
      res.u[j] = std::move(next);
    }
    res.residuals.push_back(residual);
  }
  return res;
}

}  // namespace condex
