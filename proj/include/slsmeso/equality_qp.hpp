#pragma once

// Dense equality-constrained least squares:
//   minimize z' H z  subject to  C z = b,   H symmetric PSD.
// Solved through the KKT system after removing redundant constraint rows.

#include "slsmeso/common.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>
#include <vector>

namespace slsmeso {

struct EqQpOptions {
  double infeasibility_tol = 1e-7;  ///< max |Cz - b| tolerated before declaring infeasible
  double rank_tol = 1e-10;          ///< relative pivot threshold for rank decisions
};

enum class EqQpStatus { solved, infeasible, degenerate };

inline std::string to_string(EqQpStatus s) {
  switch (s) {
    case EqQpStatus::solved: return "solved";
    case EqQpStatus::infeasible: return "infeasible";
    case EqQpStatus::degenerate: return "degenerate";
  }
  return "unknown";
}

struct EqQpResult {
  EqQpStatus status = EqQpStatus::solved;
  Vector z;                        ///< optimum, or the minimum-violation point when infeasible
  double objective = 0.0;          ///< z' H z
  double constraint_residual = 0.0;  ///< max |Cz - b|
  double stationarity = 0.0;       ///< max |2Hz + C'lambda| over the reduced system
  Index rank = 0;                  ///< rank of C
  std::string message;
};

inline EqQpResult solve_equality_qp(const Matrix& h, const Matrix& c, const Vector& b, const EqQpOptions& opt = {}) {
  const Index nv = h.rows();
  require(h.cols() == nv && c.cols() == nv && c.rows() == b.size(), "solve_equality_qp: dimension mismatch");
  EqQpResult out;
  out.z = Vector::Zero(nv);

  // Rows with no variables: either trivially satisfied or infeasible outright.
  std::vector<Index> live_rows;
  double dead_violation = 0.0;
  for (Index r = 0; r < c.rows(); ++r) {
    if (c.row(r).cwiseAbs().maxCoeff() > 0.0)
      live_rows.push_back(r);
    else
      dead_violation = std::max(dead_violation, std::abs(b(r)));
  }

  // Variables touched by no constraint and uncoupled in H stay at zero.
  std::vector<Index> live_vars;
  for (Index v = 0; v < nv; ++v) {
    bool in_constraint = false;
    for (Index r : live_rows) in_constraint = in_constraint || c(r, v) != 0.0;
    bool coupled = false;
    for (Index u = 0; u < nv && !coupled; ++u) coupled = u != v && h(u, v) != 0.0;
    if (in_constraint || coupled) live_vars.push_back(v);
  }

  const Index nr = static_cast<Index>(live_rows.size());
  const Index nl = static_cast<Index>(live_vars.size());
  Matrix cr(nr, nl);
  Vector br(nr);
  Matrix hr(nl, nl);
  for (Index r = 0; r < nr; ++r) {
    br(r) = b(live_rows[static_cast<std::size_t>(r)]);
    for (Index v = 0; v < nl; ++v) cr(r, v) = c(live_rows[static_cast<std::size_t>(r)], live_vars[static_cast<std::size_t>(v)]);
  }
  for (Index u = 0; u < nl; ++u)
    for (Index v = 0; v < nl; ++v)
      hr(u, v) = h(live_vars[static_cast<std::size_t>(u)], live_vars[static_cast<std::size_t>(v)]);

  auto scatter = [&](const Vector& zr) {
    Vector z = Vector::Zero(nv);
    for (Index v = 0; v < nl; ++v) z(live_vars[static_cast<std::size_t>(v)]) = zr(v);
    return z;
  };
  auto violation = [&](const Vector& z) {
    return c.rows() == 0 ? 0.0 : (c * z - b).cwiseAbs().maxCoeff();
  };

  // Consistency check through the minimum-norm least-squares point.
  Vector z_ls = Vector::Zero(nl);
  Index rank = 0;
  if (nr > 0 && nl > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(cr);
    cod.setThreshold(opt.rank_tol);
    z_ls = cod.solve(br);
    rank = cod.rank();
  }
  out.rank = rank;
  const double ls_violation = std::max(dead_violation, nr > 0 ? (cr * z_ls - br).cwiseAbs().maxCoeff() : 0.0);
  if (ls_violation > opt.infeasibility_tol) {
    out.status = EqQpStatus::infeasible;
    out.z = scatter(z_ls);
    out.constraint_residual = violation(out.z);
    out.objective = out.z.dot(h * out.z);
    out.message = "constraints inconsistent; minimum violation " + std::to_string(out.constraint_residual);
    return out;
  }

  // Keep a maximal independent subset of constraint rows.
  Matrix ci = cr;
  Vector bi = br;
  if (rank < nr && nr > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(cr.transpose());
    qr.setThreshold(opt.rank_tol);
    const Index keep = qr.rank();
    ci.resize(keep, nl);
    bi.resize(keep);
    for (Index r = 0; r < keep; ++r) {
      const Index src = qr.colsPermutation().indices()(r);
      ci.row(r) = cr.row(src);
      bi(r) = br(src);
    }
  }

  const Index ni = ci.rows();
  Matrix kkt = Matrix::Zero(nl + ni, nl + ni);
  kkt.topLeftCorner(nl, nl) = 2.0 * hr;
  kkt.topRightCorner(nl, ni) = ci.transpose();
  kkt.bottomLeftCorner(ni, nl) = ci;
  Vector rhs = Vector::Zero(nl + ni);
  rhs.tail(ni) = bi;

  Vector sol = Vector::Zero(nl + ni);
  if (nl + ni > 0) {
    Eigen::FullPivLU<Matrix> lu(kkt);
    lu.setThreshold(opt.rank_tol);
    if (!lu.isInvertible()) {
      out.status = EqQpStatus::degenerate;
      out.z = scatter(z_ls);
      out.constraint_residual = violation(out.z);
      out.objective = out.z.dot(h * out.z);
      out.message = "KKT matrix singular: objective not strictly convex on the feasible set";
      return out;
    }
    sol = lu.solve(rhs);
    for (int refine = 0; refine < 2; ++refine) sol += lu.solve(rhs - kkt * sol);
    out.stationarity = (kkt.topRows(nl) * sol).cwiseAbs().maxCoeff();
  }
  out.z = scatter(sol.head(nl));
  out.constraint_residual = violation(out.z);
  out.objective = out.z.dot(h * out.z);
  return out;
}

}  // namespace slsmeso
