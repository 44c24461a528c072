#pragma once

// Dense infinite-horizon LQR baseline.

#include "slsmeso/plant.hpp"
#include "slsmeso/spectral.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace slsmeso {

struct DareOptions {
  int max_iterations = 100000;
  double tolerance = 1e-9;      ///< Frobenius norm of the DARE residual
  double divergence_bound = 1e12;
};

struct LqrSolution {
  Matrix K;  ///< u = K x
  Matrix P;  ///< DARE solution
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

// Gain for a given value matrix: K = -(eps I + B'PB)^{-1} B'PA.
inline Matrix lqr_gain(const Matrix& a, const Matrix& b, const Matrix& p, double eps) {
  const Matrix btp = b.transpose() * p;
  const Matrix s = eps * Matrix::Identity(b.cols(), b.cols()) + btp * b;
  return -s.ldlt().solve(btp * a);
}

inline Matrix riccati_step(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& p, double eps) {
  const Matrix k = lqr_gain(a, b, p, eps);
  // A'PA - A'PB (eps I + B'PB)^{-1} B'PA = A'PA + A'PB K
  Matrix next = q + a.transpose() * p * a + a.transpose() * p * b * k;
  return 0.5 * (next + next.transpose());
}

}  // namespace detail

inline double dare_residual(const LinearSystem& sys, const CostSpec& cost, const Matrix& p) {
  return (detail::riccati_step(sys.A(), sys.B(), cost.Q(), p, cost.eps()) - p).norm();
}

/// Value iteration P <- Q + A'PA - A'PB(eps I + B'PB)^{-1}B'PA from P = Q.
inline LqrSolution solve_dare(const LinearSystem& sys, const CostSpec& cost, const DareOptions& opt = {}) {
  require(cost.eps() > 0.0, "solve_dare: input penalty eps must be strictly positive");
  require(cost.Q().rows() == sys.states(), "solve_dare: Q dimension mismatch");
  const Matrix& a = sys.A();
  const Matrix& b = sys.B();
  Matrix p = cost.Q();
  LqrSolution sol;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Matrix next = detail::riccati_step(a, b, cost.Q(), p, cost.eps());
    const double step = (next - p).norm();
    p = std::move(next);
    sol.iterations = it;
    if (!p.allFinite() || p.norm() > opt.divergence_bound)
      throw SolverError("solve_dare: value iteration diverged; plant not stabilizable or tolerance unreachable");
    if (step <= opt.tolerance) {
      sol.residual = dare_residual(sys, cost, p);
      if (sol.residual <= opt.tolerance) break;
    }
    if (it == opt.max_iterations) {
      sol.residual = dare_residual(sys, cost, p);
      std::ostringstream os;
      os << "solve_dare: no convergence after " << it << " iterations (residual " << sol.residual << ")";
      throw SolverError(os.str());
    }
  }
  sol.P = p;
  sol.K = detail::lqr_gain(a, b, p, cost.eps());
  const double rho = spectral_radius(a + b * sol.K);
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "solve_dare: closed loop not stable (spectral radius " << rho << ")";
    throw SolverError(os.str());
  }
  return sol;
}

struct ClosedLoopFir {
  FIRPair pair;
  double tail = 0.0;  ///< ||R(T)||_F, mass left at the truncation point
  double spectral_radius = 0.0;
};

/// Strictly causal pair R(1) = I, R(k+1) = (A + BK) R(k), M(k) = K R(k).
inline ClosedLoopFir closed_loop_fir(const LinearSystem& sys, const Matrix& k_gain, int horizon) {
  require(k_gain.rows() == sys.inputs() && k_gain.cols() == sys.states(), "closed_loop_fir: K has wrong shape");
  const Matrix acl = sys.A() + sys.B() * k_gain;
  ClosedLoopFir out{FIRPair(sys.states(), sys.inputs(), horizon, Causality::strictly_causal), 0.0,
                    spectral_radius(acl)};
  Matrix r = Matrix::Identity(sys.states(), sys.states());
  for (int k = 1; k <= horizon; ++k) {
    out.pair.R_mut(k) = r;
    out.pair.M_mut(k) = k_gain * r;
    if (k < horizon) r = acl * r;
  }
  out.tail = out.pair.R(horizon).norm();
  return out;
}

struct LyapunovOptions {
  int max_doublings = 64;
  double tolerance = 1e-11;
};

/// Solves X = F' X F + W for Schur-stable F by squared Smith iteration.
inline Matrix solve_discrete_lyapunov(const Matrix& f, const Matrix& w, const LyapunovOptions& opt = {}) {
  require(f.rows() == f.cols() && w.rows() == f.rows() && w.cols() == f.cols(),
          "solve_discrete_lyapunov: dimension mismatch");
  Matrix x = w;
  Matrix ak = f;
  for (int i = 0; i < opt.max_doublings; ++i) {
    x = x + ak.transpose() * x * ak;
    ak = ak * ak;
    if (!x.allFinite()) break;
    const double res = (f.transpose() * x * f + w - x).norm();
    if (res <= opt.tolerance * std::max(1.0, x.norm())) return 0.5 * (x + x.transpose());
  }
  throw SolverError("solve_discrete_lyapunov: no convergence");
}

/// Exact infinite-horizon H2 cost of u = Kx under unit impulses at every node.
inline double lqr_cost(const LinearSystem& sys, const Matrix& k_gain, const CostSpec& cost) {
  const Matrix acl = sys.A() + sys.B() * k_gain;
  const double rho = spectral_radius(acl);
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "lqr_cost: closed loop unstable (spectral radius " << rho << ")";
    throw SolverError(os.str());
  }
  const Matrix w = cost.Q() + cost.eps() * k_gain.transpose() * k_gain;
  return solve_discrete_lyapunov(acl, w).trace();
}

}  // namespace slsmeso
