#pragma once

// Sparsity sets as per-spectral-index masks built from locality and delay.

#include "slsmeso/plant.hpp"
#include "slsmeso/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace slsmeso {

/// d-hop locality with communication and self delays (in time steps).
///
/// Entry (i, j) of an element with spectral index k is allowed iff
///   dist(i, j) <= d  and  k >= k0 + comm_delay * dist(i, j),
/// where k0 is the first causal index of that element (1 for R, and
/// 0 or 1 for M depending on causality). For diagonal M entries
/// `self_delay` is the number of steps between a disturbance and the
/// first use of it by the co-located controller: allowed iff k >= self_delay.
struct LocalityRule {
  int d = 0;
  int comm_delay = 0;
  int self_delay = 0;
};

namespace detail {

inline bool locality_allows(int dist, int k, int k0, const LocalityRule& rule, bool diagonal_m) {
  if (dist < 0 || dist > rule.d) return false;
  if (k < k0 + rule.comm_delay * dist) return false;
  if (diagonal_m && dist == 0 && k < rule.self_delay) return false;
  return true;
}

}  // namespace detail

/// Masks for R from `r_rule` and for M from `m_rule`.
inline SupportSpec locality_support(const LinearSystem& sys, const LocalityRule& r_rule,
                                    const LocalityRule& m_rule, int horizon, Causality mode) {
  require(horizon >= 1, "locality_support: horizon must be positive");
  require(r_rule.d >= 0 && m_rule.d >= 0, "locality_support: d must be nonnegative");
  require(r_rule.comm_delay >= 0 && m_rule.comm_delay >= 0 && r_rule.self_delay >= 0 && m_rule.self_delay >= 0,
          "locality_support: delays must be nonnegative");
  const Index n = sys.states();
  const Index m = sys.inputs();
  const Eigen::MatrixXi dist = distance_matrix(sys.topology());

  SupportSpec s;
  s.horizon = horizon;
  s.causality = mode;
  s.provenance = {"locality", m_rule.d, m_rule.comm_delay, m_rule.self_delay, 0.0};

  for (int k = 1; k <= horizon; ++k) {
    Mask mk(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) mk(i, j) = detail::locality_allows(dist(i, j), k, 1, r_rule, false);
    s.r_masks.push_back(std::move(mk));
  }
  const int k0 = first_m_index(mode);
  for (int k = k0; k <= horizon; ++k) {
    Mask mk(m, n);
    for (Index a = 0; a < m; ++a) {
      const Index node = sys.actuated()[static_cast<std::size_t>(a)];
      for (Index j = 0; j < n; ++j) mk(a, j) = detail::locality_allows(dist(node, j), k, k0, m_rule, true);
    }
    s.m_masks.push_back(std::move(mk));
  }
  return s;
}

inline SupportSpec locality_support(const LinearSystem& sys, const LocalityRule& rule, int horizon,
                                    Causality mode) {
  return locality_support(sys, rule, rule, horizon, mode);
}

inline FIRPair apply_mask(const FIRPair& pair, const SupportSpec& spec) {
  require(spec.matches(pair), "apply_mask: support does not match pair shape");
  FIRPair out = pair;
  for (int k = 1; k <= pair.horizon(); ++k)
    out.R_mut(k) = spec.r_mask(k).select(pair.R(k).array(), 0.0).matrix();
  for (int k = pair.k0(); k <= pair.horizon(); ++k)
    out.M_mut(k) = spec.m_mask(k).select(pair.M(k).array(), 0.0).matrix();
  return out;
}

struct MaskViolation {
  char which = 'R';
  int k = 0;
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

struct MaskCheck {
  bool ok = true;
  std::vector<MaskViolation> violations;
};

inline MaskCheck check_mask(const FIRPair& pair, const SupportSpec& spec, double tol) {
  require(spec.matches(pair), "check_mask: support does not match pair shape");
  MaskCheck out;
  auto scan = [&](char which, int k, const Matrix& v, const Mask& mask) {
    for (Index c = 0; c < v.cols(); ++c)
      for (Index r = 0; r < v.rows(); ++r)
        if (!mask(r, c) && std::abs(v(r, c)) > tol) out.violations.push_back({which, k, r, c, v(r, c)});
  };
  for (int k = 1; k <= pair.horizon(); ++k) scan('R', k, pair.R(k), spec.r_mask(k));
  for (int k = pair.k0(); k <= pair.horizon(); ++k) scan('M', k, pair.M(k), spec.m_mask(k));
  out.ok = out.violations.empty();
  return out;
}

/// True iff every entry allowed by `inner` is also allowed by `outer`
/// (element indices beyond `inner`'s horizon are ignored).
inline bool mask_subset(const SupportSpec& inner, const SupportSpec& outer) {
  if (inner.causality != outer.causality || inner.horizon > outer.horizon) return false;
  for (int k = 1; k <= inner.horizon; ++k)
    if ((inner.r_mask(k) && !outer.r_mask(k)).any()) return false;
  for (int k = inner.k0(); k <= inner.horizon; ++k)
    if ((inner.m_mask(k) && !outer.m_mask(k)).any()) return false;
  return true;
}

}  // namespace slsmeso
