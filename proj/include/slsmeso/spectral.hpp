#pragma once

// Finite-horizon transfer pairs {R(k)}, {M(k)}: spectral elements of the
// disturbance-to-state and disturbance-to-input maps.

#include "slsmeso/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

namespace slsmeso {

inline constexpr double kDefaultZeroTol = 1e-9;
/// Coefficients at or below this magnitude are dropped when a pair is realized.
inline constexpr double kRealizationTol = 1e-12;

class FIRPair {
 public:
  FIRPair() = default;

  /// Zero pair with `states` rows in R, `inputs` rows in M.
  FIRPair(Index states, Index inputs, int horizon, Causality causality)
      : n_(states), m_(inputs), horizon_(horizon), causality_(causality) {
    require(horizon >= 1, "FIRPair: horizon must be positive");
    require(states > 0 && inputs >= 0, "FIRPair: bad dimensions");
    r_.assign(static_cast<std::size_t>(horizon), Matrix::Zero(states, states));
    m_elems_.assign(static_cast<std::size_t>(horizon + 1 - k0()), Matrix::Zero(inputs, states));
    zero_r_ = Matrix::Zero(states, states);
    zero_m_ = Matrix::Zero(inputs, states);
  }

  Index states() const { return n_; }
  Index inputs() const { return m_; }
  int horizon() const { return horizon_; }
  Causality causality() const { return causality_; }
  /// First spectral index at which M may be nonzero.
  int k0() const { return first_m_index(causality_); }

  /// R(k); zero for k = 0 and k > T.
  const Matrix& R(int k) const {
    if (k < 1 || k > horizon_) return zero_r_;
    return r_[static_cast<std::size_t>(k - 1)];
  }
  /// M(k); zero outside [k0, T].
  const Matrix& M(int k) const {
    if (k < k0() || k > horizon_) return zero_m_;
    return m_elems_[static_cast<std::size_t>(k - k0())];
  }

  Matrix& R_mut(int k) {
    require(k >= 1 && k <= horizon_, "FIRPair: R index out of range");
    return r_[static_cast<std::size_t>(k - 1)];
  }
  Matrix& M_mut(int k) {
    require(k >= k0() && k <= horizon_, "FIRPair: M index out of range");
    return m_elems_[static_cast<std::size_t>(k - k0())];
  }

  bool same_shape(const FIRPair& o) const {
    return n_ == o.n_ && m_ == o.m_ && horizon_ == o.horizon_ && causality_ == o.causality_;
  }

 private:
  Index n_ = 0;
  Index m_ = 0;
  int horizon_ = 0;
  Causality causality_ = Causality::strictly_causal;
  std::vector<Matrix> r_;
  std::vector<Matrix> m_elems_;
  Matrix zero_r_;
  Matrix zero_m_;
};

/// Quadratic cost: state penalty Q (PSD) and input weight eps * I.
class CostSpec {
 public:
  CostSpec() = default;

  CostSpec(Matrix q, double eps) : q_(std::move(q)), eps_(eps) {
    require(q_.rows() == q_.cols(), "CostSpec: Q must be square");
    require(eps_ >= 0.0 && std::isfinite(eps_), "CostSpec: eps must be nonnegative");
    require((q_ - q_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + q_.cwiseAbs().maxCoeff()),
            "CostSpec: Q must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(q_, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, q_.cwiseAbs().maxCoeff());
    require(es.eigenvalues().minCoeff() >= -1e-12 * scale, "CostSpec: Q must be positive semidefinite");
  }

  static CostSpec identity(Index n, double eps) { return CostSpec(Matrix::Identity(n, n), eps); }

  const Matrix& Q() const { return q_; }
  double eps() const { return eps_; }

 private:
  Matrix q_;
  double eps_ = 0.0;
};

struct H2Cost {
  double total = 0.0;       ///< state term + eps * input term
  double state_only = 0.0;  ///< sum_k ||Q^{1/2} R(k)||_F^2
};

inline H2Cost h2_cost(const FIRPair& pair, const CostSpec& cost) {
  require(cost.Q().rows() == pair.states(), "h2_cost: Q dimension mismatch");
  H2Cost out;
  for (int k = 1; k <= pair.horizon(); ++k) {
    const Matrix& r = pair.R(k);
    out.state_only += (r.transpose() * cost.Q() * r).trace();
  }
  double input = 0.0;
  for (int k = pair.k0(); k <= pair.horizon(); ++k) input += pair.M(k).squaredNorm();
  out.total = out.state_only + cost.eps() * input;
  return out;
}

inline double h2_cost_sq(const FIRPair& pair, const CostSpec& cost) { return h2_cost(pair, cost).total; }

/// u(t) = sum_k M(k) w(t-k). `w[s]` is the disturbance at time s; times
/// outside [0, w.size()) are treated as zero (system at rest).
inline Vector convolve(const FIRPair& pair, const std::vector<Vector>& w, int t) {
  Vector u = Vector::Zero(pair.inputs());
  for (int k = pair.k0(); k <= pair.horizon(); ++k) {
    const int s = t - k;
    if (s < 0 || s >= static_cast<int>(w.size())) continue;
    require(w[static_cast<std::size_t>(s)].size() == pair.states(), "convolve: disturbance dimension mismatch");
    u.noalias() += pair.M(k) * w[static_cast<std::size_t>(s)];
  }
  return u;
}

/// Response to a unit impulse at node i: entry k is the value at offset k
/// after the impulse, for k = 0..T.
struct ImpulseColumns {
  std::vector<Vector> x;
  std::vector<Vector> u;
};

inline ImpulseColumns impulse_columns(const FIRPair& pair, Index i) {
  require(i >= 0 && i < pair.states(), "impulse_columns: node out of range");
  ImpulseColumns out;
  for (int k = 0; k <= pair.horizon(); ++k) {
    out.x.push_back(pair.R(k).col(i));
    out.u.push_back(pair.M(k).col(i));
  }
  return out;
}

/// Per-spectral-index boolean masks. R masks exist for k = 1..T,
/// M masks for k = k0..T. M rows are actuators, columns disturbance nodes.
struct SupportSpec {
  struct Provenance {
    std::string rule = "custom";
    int d = -1;
    int comm_delay = 0;
    int self_delay = 0;
    double threshold = 0.0;
  };

  int horizon = 0;
  Causality causality = Causality::strictly_causal;
  std::vector<Mask> r_masks;
  std::vector<Mask> m_masks;
  Provenance provenance;

  int k0() const { return first_m_index(causality); }
  const Mask& r_mask(int k) const { return r_masks.at(static_cast<std::size_t>(k - 1)); }
  const Mask& m_mask(int k) const { return m_masks.at(static_cast<std::size_t>(k - k0())); }
  Mask& r_mask(int k) { return r_masks.at(static_cast<std::size_t>(k - 1)); }
  Mask& m_mask(int k) { return m_masks.at(static_cast<std::size_t>(k - k0())); }

  static SupportSpec all(Index n, Index m, int horizon, Causality c, bool value) {
    SupportSpec s;
    s.horizon = horizon;
    s.causality = c;
    s.r_masks.assign(static_cast<std::size_t>(horizon), Mask::Constant(n, n, value));
    s.m_masks.assign(static_cast<std::size_t>(horizon + 1 - first_m_index(c)), Mask::Constant(m, n, value));
    return s;
  }

  bool matches(const FIRPair& p) const {
    return horizon == p.horizon() && causality == p.causality() && !r_masks.empty() &&
           r_masks.front().rows() == p.states() && m_masks.front().rows() == p.inputs();
  }

  Index allowed_count() const {
    Index c = 0;
    for (const auto& m : r_masks) c += m.count();
    for (const auto& m : m_masks) c += m.count();
    return c;
  }
};

/// Copy with every entry of magnitude <= tol set to zero.
inline FIRPair prune(const FIRPair& pair, double tol) {
  FIRPair out = pair;
  auto cut = [tol](Matrix& v) { v = (v.array().abs() > tol).select(v.array(), 0.0).matrix(); };
  for (int k = 1; k <= pair.horizon(); ++k) cut(out.R_mut(k));
  for (int k = pair.k0(); k <= pair.horizon(); ++k) cut(out.M_mut(k));
  return out;
}

inline SupportSpec support_of(const FIRPair& pair, double zero_tol = kDefaultZeroTol) {
  SupportSpec s;
  s.horizon = pair.horizon();
  s.causality = pair.causality();
  for (int k = 1; k <= pair.horizon(); ++k) s.r_masks.push_back(pair.R(k).array().abs() > zero_tol);
  for (int k = pair.k0(); k <= pair.horizon(); ++k) s.m_masks.push_back(pair.M(k).array().abs() > zero_tol);
  s.provenance.rule = "support_of";
  s.provenance.threshold = zero_tol;
  return s;
}

}  // namespace slsmeso
