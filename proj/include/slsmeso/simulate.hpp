#pragma once

// Closed-loop time-domain simulation. Time convention: w(t) enters x(t+1),
//   x(t+1) = A x(t) + B u(t) + w(t),  x(0) given (default 0).

#include "slsmeso/plant.hpp"
#include "slsmeso/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <sstream>
#include <vector>

namespace slsmeso {

struct Trajectory {
  int steps = 0;
  std::vector<Vector> x;  ///< t = 0..steps
  std::vector<Vector> u;  ///< t = 0..steps-1
  std::vector<Vector> w;  ///< t = 0..steps-1
  // SLS realization only, t = 0..steps.
  std::vector<Vector> delta_hat;
  std::vector<Vector> x_hat;

  bool has_internal() const { return !delta_hat.empty(); }
};

/// Newest-first buffer of the last `depth` vectors; at(0) is the most recent.
class FirMemory {
 public:
  FirMemory(int depth, Index dim) : depth_(depth) {
    require(depth >= 0, "FirMemory: negative depth");
    buf_.assign(static_cast<std::size_t>(depth), Vector::Zero(dim));
  }

  int depth() const { return depth_; }

  /// Prepends `v`; the oldest entry is discarded.
  void push(const Vector& v) {
    if (depth_ == 0) return;
    buf_.pop_back();
    buf_.push_front(v);
  }

  const Vector& at(int lag) const { return buf_.at(static_cast<std::size_t>(lag)); }

 private:
  int depth_;
  std::deque<Vector> buf_;
};

/// max_t |x(t+1) - A x(t) - B u(t) - w(t)|, scaled by max(1, |x(t+1)|).
inline double dynamics_residual(const Trajectory& traj, const LinearSystem& sys) {
  double worst = 0.0;
  for (int t = 0; t < traj.steps; ++t) {
    const auto s = static_cast<std::size_t>(t);
    const Vector r = traj.x[s + 1] - sys.A() * traj.x[s] - sys.B() * traj.u[s] - traj.w[s];
    const double scale = std::max(1.0, traj.x[s + 1].cwiseAbs().maxCoeff());
    worst = std::max(worst, r.cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

namespace detail {

inline constexpr double kDynamicsTol = 1e-10;

inline std::vector<Vector> padded_disturbance(const std::vector<Vector>& w_seq, int steps, Index n) {
  require(steps >= 0, "simulate: negative step count");
  std::vector<Vector> w(static_cast<std::size_t>(steps), Vector::Zero(n));
  for (int t = 0; t < steps && t < static_cast<int>(w_seq.size()); ++t) {
    require(w_seq[static_cast<std::size_t>(t)].size() == n, "simulate: disturbance dimension mismatch");
    w[static_cast<std::size_t>(t)] = w_seq[static_cast<std::size_t>(t)];
  }
  return w;
}

inline Vector initial_state(const std::optional<Vector>& x0, Index n) {
  if (!x0) return Vector::Zero(n);
  require(x0->size() == n, "simulate: initial state dimension mismatch");
  return *x0;
}

inline void check_dynamics(const Trajectory& traj, const LinearSystem& sys) {
  const double r = dynamics_residual(traj, sys);
  if (!(r <= kDynamicsTol)) {
    std::ostringstream os;
    os << "simulate: dynamics residual " << r << " exceeds tolerance";
    throw SolverError(os.str());
  }
}

}  // namespace detail

/// u(t) = K x(t).
inline Trajectory simulate_static(const LinearSystem& sys, const Matrix& k_gain, const std::vector<Vector>& w_seq,
                                  int steps, const std::optional<Vector>& x0 = std::nullopt) {
  const Index n = sys.states();
  require(k_gain.rows() == sys.inputs() && k_gain.cols() == n, "simulate_static: K has wrong shape");
  Trajectory tr;
  tr.steps = steps;
  tr.w = detail::padded_disturbance(w_seq, steps, n);
  tr.x.push_back(detail::initial_state(x0, n));
  for (int t = 0; t < steps; ++t) {
    const auto s = static_cast<std::size_t>(t);
    tr.u.push_back(k_gain * tr.x[s]);
    tr.x.push_back(sys.A() * tr.x[s] + sys.B() * tr.u[s] + tr.w[s]);
  }
  detail::check_dynamics(tr, sys);
  return tr;
}

/// Disturbance feedback u(t) = sum_k M(k) w(t-k), with w handed to the
/// controller directly. A nonzero x(0) is treated as w(-1).
inline Trajectory simulate_mdesign(const LinearSystem& sys, const FIRPair& pair, const std::vector<Vector>& w_seq,
                                   int steps, const std::optional<Vector>& x0 = std::nullopt) {
  const Index n = sys.states();
  require(pair.states() == n && pair.inputs() == sys.inputs(), "simulate_mdesign: pair and plant dimensions differ");
  Trajectory tr;
  tr.steps = steps;
  tr.w = detail::padded_disturbance(w_seq, steps, n);
  tr.x.push_back(detail::initial_state(x0, n));
  FirMemory past(pair.horizon(), n);  // w(t-1), ..., w(t-T)
  past.push(tr.x[0]);
  for (int t = 0; t < steps; ++t) {
    const auto s = static_cast<std::size_t>(t);
    Vector u = pair.M(0) * tr.w[s];
    for (int k = 1; k <= pair.horizon(); ++k) u.noalias() += pair.M(k) * past.at(k - 1);
    tr.u.push_back(std::move(u));
    tr.x.push_back(sys.A() * tr.x[s] + sys.B() * tr.u[s] + tr.w[s]);
    past.push(tr.w[s]);
  }
  detail::check_dynamics(tr, sys);
  return tr;
}

inline void require_sls_realizable(const FIRPair& pair, double tol = 1e-9) {
  require(pair.causality() == Causality::strictly_causal, "SLS realization needs a strictly causal pair");
  const Matrix d = pair.R(1) - Matrix::Identity(pair.states(), pair.states());
  require(d.cwiseAbs().maxCoeff() <= tol, "SLS realization needs R(1) = I");
}

/// SLS internal-feedback realization:
///   x_hat(t) = sum_{k>=2} R(k) delta_hat(t-k+1)
///   delta_hat(t) = x(t) - x_hat(t)
///   u(t) = sum_{k>=1} M(k) delta_hat(t-k+1)
/// Sums run k ascending then source ascending so that the distributed
/// realization reproduces them bit for bit.
inline Trajectory simulate_sls(const LinearSystem& sys, const FIRPair& pair, const std::vector<Vector>& w_seq,
                               int steps, const std::optional<Vector>& x0 = std::nullopt) {
  const Index n = sys.states();
  const Index m = sys.inputs();
  require(pair.states() == n && pair.inputs() == m, "simulate_sls: pair and plant dimensions differ");
  require_sls_realizable(pair);
  const int T = pair.horizon();

  Trajectory tr;
  tr.steps = steps;
  tr.w = detail::padded_disturbance(w_seq, steps, n);
  tr.x.push_back(detail::initial_state(x0, n));
  FirMemory mem(T, n);  // before the push at time t: delta_hat(t-1), ..., delta_hat(t-T)

  for (int t = 0; t <= steps; ++t) {
    const auto s = static_cast<std::size_t>(t);
    Vector xh = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 2; k <= T; ++k) {
        const Vector& dh = mem.at(k - 2);
        for (Index j = 0; j < n; ++j) acc += pair.R(k)(i, j) * dh(j);
      }
      xh(i) = acc;
    }
    Vector dh = tr.x[s] - xh;
    mem.push(dh);
    tr.x_hat.push_back(std::move(xh));
    tr.delta_hat.push_back(std::move(dh));
    if (t == steps) break;

    Vector u = Vector::Zero(m);
    for (Index a = 0; a < m; ++a) {
      double acc = 0.0;
      for (int k = 1; k <= T; ++k) {
        const Vector& d = mem.at(k - 1);
        for (Index j = 0; j < n; ++j) acc += pair.M(k)(a, j) * d(j);
      }
      u(a) = acc;
    }
    tr.u.push_back(std::move(u));
    tr.x.push_back(sys.A() * tr.x[s] + sys.B() * tr.u[s] + tr.w[s]);
  }
  detail::check_dynamics(tr, sys);
  return tr;
}

/// Unit impulse w(t0) = e_node (0-based node).
inline std::vector<Vector> impulse_disturbance(Index n, Index node, int t0, int steps) {
  require(node >= 0 && node < n, "impulse_disturbance: node out of range");
  require(t0 >= 0 && t0 < steps, "impulse_disturbance: impulse time outside the simulated window");
  std::vector<Vector> w(static_cast<std::size_t>(steps), Vector::Zero(n));
  w[static_cast<std::size_t>(t0)](node) = 1.0;
  return w;
}

struct LocalizationReport {
  int radius = 0;                    ///< max hop distance from the source over active nodes
  std::vector<Index> active;         ///< nodes with state or co-located actuation above tol
  std::vector<Index> state_active;   ///< nodes with |x_i(t)| > tol for some t
  std::vector<Index> actuator_active;  ///< nodes whose actuator has |u(t)| > tol for some t
  std::vector<std::optional<int>> first_active;  ///< per node, first t with activity
  bool unreachable_activity = false;  ///< activity on a node disconnected from the source
};

inline LocalizationReport localization_radius(const Trajectory& traj, Index source, const LinearSystem& sys,
                                              double tol) {
  const Index n = sys.states();
  require(source >= 0 && source < n, "localization_radius: source out of range");
  LocalizationReport rep;
  rep.first_active.assign(static_cast<std::size_t>(n), std::nullopt);
  std::vector<bool> xs(static_cast<std::size_t>(n), false);
  std::vector<bool> us(static_cast<std::size_t>(n), false);
  auto mark = [&](Index node, int t) {
    auto& f = rep.first_active[static_cast<std::size_t>(node)];
    if (!f || t < *f) f = t;
  };
  for (std::size_t t = 0; t < traj.x.size(); ++t)
    for (Index i = 0; i < n; ++i)
      if (std::abs(traj.x[t](i)) > tol) {
        xs[static_cast<std::size_t>(i)] = true;
        mark(i, static_cast<int>(t));
      }
  for (std::size_t t = 0; t < traj.u.size(); ++t)
    for (Index a = 0; a < sys.inputs(); ++a)
      if (std::abs(traj.u[t](a)) > tol) {
        const Index node = sys.actuated()[static_cast<std::size_t>(a)];
        us[static_cast<std::size_t>(node)] = true;
        mark(node, static_cast<int>(t));
      }
  const auto dist = bfs_distances(sys.topology(), source);
  for (Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (xs[u]) rep.state_active.push_back(i);
    if (us[u]) rep.actuator_active.push_back(i);
    if (xs[u] || us[u]) {
      rep.active.push_back(i);
      if (dist[u])
        rep.radius = std::max(rep.radius, *dist[u]);
      else
        rep.unreachable_activity = true;
    }
  }
  return rep;
}

}  // namespace slsmeso
