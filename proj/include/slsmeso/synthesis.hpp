#pragma once

// Localized controller synthesis over masked spectral elements.
//
// Each disturbance column j is an independent equality-constrained least
// squares problem in the on-mask entries of R(k)e_j and M(k)e_j.

#include "slsmeso/constraints.hpp"
#include "slsmeso/equality_qp.hpp"
#include "slsmeso/plant.hpp"
#include "slsmeso/spectral.hpp"

#include <algorithm>
#include <string>
#include <thread>
#include <vector>

namespace slsmeso {

enum class SynthesisMode { mdesign, sls };

inline std::string to_string(SynthesisMode m) { return m == SynthesisMode::mdesign ? "mdesign" : "sls"; }

inline Causality causality_of(SynthesisMode m) {
  return m == SynthesisMode::mdesign ? Causality::causal_m : Causality::strictly_causal;
}

struct SynthesisOptions {
  /// Impose A R(T) + B M(T) = 0. Off by default: the horizon is a truncation
  /// and the leftover mass is reported as `truncation_tail`.
  bool fir_closure = false;
  EqQpOptions qp;
  int threads = 1;
};

struct SynthesisProblem {
  LinearSystem sys;
  CostSpec cost;
  SupportSpec support;
  SynthesisMode mode = SynthesisMode::sls;
  SynthesisOptions options;

  int horizon() const { return support.horizon; }
};

/// Problem with masks generated from one locality rule.
inline SynthesisProblem make_problem(const LinearSystem& sys, const CostSpec& cost, const LocalityRule& rule,
                                     int horizon, SynthesisMode mode, SynthesisOptions options = {}) {
  return {sys, cost, locality_support(sys, rule, horizon, causality_of(mode)), mode, options};
}

/// Problem with every entry allowed.
inline SynthesisProblem make_unconstrained_problem(const LinearSystem& sys, const CostSpec& cost, int horizon,
                                                   SynthesisMode mode, SynthesisOptions options = {}) {
  SupportSpec s = SupportSpec::all(sys.states(), sys.inputs(), horizon, causality_of(mode), true);
  s.provenance.rule = "unconstrained";
  return {sys, cost, std::move(s), mode, options};
}

struct ColumnStatus {
  EqQpStatus status = EqQpStatus::solved;
  double residual = 0.0;  ///< max constraint violation of the returned column
  double objective = 0.0;
  Index variables = 0;
  Index constraints = 0;
  Index rank = 0;
  std::string message;

  bool feasible() const { return status == EqQpStatus::solved; }
};

struct SolverStats {
  double max_stationarity = 0.0;
  double max_constraint_residual = 0.0;
  Index total_variables = 0;
  Index total_constraints = 0;
};

struct SynthesisResult {
  FIRPair pair;
  SynthesisMode mode = SynthesisMode::sls;
  double objective = 0.0;   ///< state cost + eps * input cost
  double state_only = 0.0;  ///< state cost alone
  std::vector<ColumnStatus> columns;
  SolverStats stats;
  double feasibility_residual = 0.0;
  double truncation_tail = 0.0;  ///< ||A R(T) + B M(T)||_F

  bool ok() const {
    return std::all_of(columns.begin(), columns.end(), [](const ColumnStatus& c) { return c.feasible(); });
  }
  std::vector<Index> infeasible_columns() const {
    std::vector<Index> out;
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (!columns[j].feasible()) out.push_back(static_cast<Index>(j));
    return out;
  }
};

/// Variable reference inside one column problem.
struct ColumnVar {
  char which = 'R';
  int k = 0;
  Index row = 0;
};

/// min z'Hz s.t. Cz = b for disturbance column j.
struct ColumnQp {
  Matrix H;
  Matrix C;
  Vector b;
  std::vector<ColumnVar> vars;
};

inline void validate_problem(const SynthesisProblem& p) {
  const Index n = p.sys.states();
  const Index m = p.sys.inputs();
  require(p.cost.Q().rows() == n, "synthesize: Q dimension does not match the plant");
  require(p.support.horizon >= 1, "synthesize: horizon must be positive");
  require(p.support.causality == causality_of(p.mode),
          "synthesize: support causality " + to_string(p.support.causality) + " does not match mode " +
              to_string(p.mode));
  require(static_cast<int>(p.support.r_masks.size()) == p.support.horizon,
          "synthesize: R masks do not cover the horizon");
  require(static_cast<int>(p.support.m_masks.size()) == p.support.horizon + 1 - p.support.k0(),
          "synthesize: M masks do not cover the horizon");
  for (const auto& mk : p.support.r_masks)
    require(mk.rows() == n && mk.cols() == n, "synthesize: R mask has wrong shape");
  for (const auto& mk : p.support.m_masks)
    require(mk.rows() == m && mk.cols() == n, "synthesize: M mask has wrong shape");
}

inline ColumnQp build_column_qp(const SynthesisProblem& p, Index j) {
  const Index n = p.sys.states();
  const Index m = p.sys.inputs();
  const int T = p.horizon();
  const int k0 = p.support.k0();
  const Matrix& A = p.sys.A();
  const Matrix& B = p.sys.B();
  require(j >= 0 && j < n, "build_column_qp: column out of range");

  ColumnQp qp;
  // rv[k][i], mv[k][a]: variable index or -1 for structural zeros.
  std::vector<std::vector<Index>> rv(static_cast<std::size_t>(T + 1), std::vector<Index>(static_cast<std::size_t>(n), -1));
  std::vector<std::vector<Index>> mv(static_cast<std::size_t>(T + 1), std::vector<Index>(static_cast<std::size_t>(m), -1));
  for (int k = 1; k <= T; ++k)
    for (Index i = 0; i < n; ++i)
      if (p.support.r_mask(k)(i, j)) {
        rv[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = static_cast<Index>(qp.vars.size());
        qp.vars.push_back({'R', k, i});
      }
  for (int k = k0; k <= T; ++k)
    for (Index a = 0; a < m; ++a)
      if (p.support.m_mask(k)(a, j)) {
        mv[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] = static_cast<Index>(qp.vars.size());
        qp.vars.push_back({'M', k, a});
      }
  const Index nv = static_cast<Index>(qp.vars.size());
  auto r_at = [&](int k, Index i) { return rv[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]; };
  auto m_at = [&](int k, Index a) { return mv[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)]; };

  qp.H = Matrix::Zero(nv, nv);
  for (int k = 1; k <= T; ++k)
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < n; ++l)
        if (r_at(k, i) >= 0 && r_at(k, l) >= 0) qp.H(r_at(k, i), r_at(k, l)) = p.cost.Q()(i, l);
  for (int k = k0; k <= T; ++k)
    for (Index a = 0; a < m; ++a)
      if (m_at(k, a) >= 0) qp.H(m_at(k, a), m_at(k, a)) = p.cost.eps();

  const int blocks = T + (p.options.fir_closure ? 1 : 0);
  qp.C = Matrix::Zero(static_cast<Index>(blocks) * n, nv);
  qp.b = Vector::Zero(static_cast<Index>(blocks) * n);

  // Block s (0-based) encodes R(s+1) - A R(s) - B M(s) = [s == 0] e_j,
  // with R(0) = 0; the closure block has no R(T+1) term.
  for (int s = 0; s < blocks; ++s) {
    for (Index i = 0; i < n; ++i) {
      const Index row = static_cast<Index>(s) * n + i;
      if (s + 1 <= T && r_at(s + 1, i) >= 0) qp.C(row, r_at(s + 1, i)) += 1.0;
      if (s >= 1)
        for (Index l = 0; l < n; ++l)
          if (A(i, l) != 0.0 && r_at(s, l) >= 0) qp.C(row, r_at(s, l)) -= A(i, l);
      if (s >= k0)
        for (Index a = 0; a < m; ++a)
          if (B(i, a) != 0.0 && m_at(s, a) >= 0) qp.C(row, m_at(s, a)) -= B(i, a);
      if (s == 0 && i == j) qp.b(row) = 1.0;
    }
  }
  return qp;
}

namespace detail {

inline void scatter_column(const ColumnQp& qp, const Vector& z, Index j, FIRPair& pair) {
  for (std::size_t v = 0; v < qp.vars.size(); ++v) {
    const ColumnVar& var = qp.vars[v];
    if (var.which == 'R')
      pair.R_mut(var.k)(var.row, j) = z(static_cast<Index>(v));
    else
      pair.M_mut(var.k)(var.row, j) = z(static_cast<Index>(v));
  }
}

}  // namespace detail

/// max over imposed conditions of the Frobenius residual:
/// start R(1) - I - B M(0), recursion R(k+1) - A R(k) - B M(k) for k < T,
/// and, when `include_closure`, A R(T) + B M(T).
inline double feasibility_residual(const FIRPair& pair, const LinearSystem& sys, bool include_closure = false) {
  require(pair.states() == sys.states() && pair.inputs() == sys.inputs(),
          "feasibility_residual: pair and plant dimensions differ");
  const Index n = sys.states();
  double worst = (pair.R(1) - Matrix::Identity(n, n) - sys.B() * pair.M(0)).norm();
  for (int k = 1; k < pair.horizon(); ++k)
    worst = std::max(worst, (pair.R(k + 1) - sys.A() * pair.R(k) - sys.B() * pair.M(k)).norm());
  if (include_closure)
    worst = std::max(worst, (sys.A() * pair.R(pair.horizon()) + sys.B() * pair.M(pair.horizon())).norm());
  return worst;
}

inline double truncation_tail(const FIRPair& pair, const LinearSystem& sys) {
  return (sys.A() * pair.R(pair.horizon()) + sys.B() * pair.M(pair.horizon())).norm();
}

inline SynthesisResult synthesize(const SynthesisProblem& p) {
  validate_problem(p);
  const Index n = p.sys.states();
  SynthesisResult res;
  res.mode = p.mode;
  res.pair = FIRPair(n, p.sys.inputs(), p.horizon(), p.support.causality);
  res.columns.resize(static_cast<std::size_t>(n));

  std::vector<ColumnQp> qps(static_cast<std::size_t>(n));
  std::vector<EqQpResult> sols(static_cast<std::size_t>(n));
  auto work = [&](Index j) {
    const auto u = static_cast<std::size_t>(j);
    qps[u] = build_column_qp(p, j);
    sols[u] = solve_equality_qp(qps[u].H, qps[u].C, qps[u].b, p.options.qp);
  };
  const int threads = std::clamp(p.options.threads, 1, static_cast<int>(n));
  if (threads == 1) {
    for (Index j = 0; j < n; ++j) work(j);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (Index j = w; j < n; j += threads) work(j);
      });
  }

  // Assembly in column order regardless of how the columns were solved.
  for (Index j = 0; j < n; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const EqQpResult& s = sols[u];
    detail::scatter_column(qps[u], s.z, j, res.pair);
    ColumnStatus& cs = res.columns[u];
    cs.status = s.status;
    cs.residual = s.constraint_residual;
    cs.objective = s.objective;
    cs.variables = static_cast<Index>(qps[u].vars.size());
    cs.constraints = qps[u].C.rows();
    cs.rank = s.rank;
    cs.message = s.message;
    res.stats.max_stationarity = std::max(res.stats.max_stationarity, s.stationarity);
    res.stats.max_constraint_residual = std::max(res.stats.max_constraint_residual, s.constraint_residual);
    res.stats.total_variables += cs.variables;
    res.stats.total_constraints += cs.constraints;
  }
  const H2Cost c = h2_cost(res.pair, p.cost);
  res.objective = c.total;
  res.state_only = c.state_only;
  res.feasibility_residual = feasibility_residual(res.pair, p.sys, p.options.fir_closure);
  res.truncation_tail = truncation_tail(res.pair, p.sys);
  return res;
}

inline double normalized_cost(double objective, double baseline) {
  require(baseline > 0.0, "normalized_cost: baseline must be positive");
  return objective / baseline;
}

inline double normalized_cost(const SynthesisResult& result, double baseline) {
  return normalized_cost(result.objective, baseline);
}

struct StaticGainFit {
  Matrix K;
  double residual = 0.0;           ///< sqrt(sum_k ||M(k) - K R(k)||_F^2)
  double relative_residual = 0.0;  ///< residual / sqrt(sum_k ||M(k)||_F^2), 0 for a zero M
};

/// Least-squares static gain with M(k) ~ K R(k) over every stored index.
inline StaticGainFit to_static_gain_check(const FIRPair& pair) {
  const Index n = pair.states();
  const Index m = pair.inputs();
  const int k0 = pair.k0();
  const int count = pair.horizon() + 1 - k0;
  Matrix rs(n, n * count);
  Matrix ms(m, n * count);
  for (int k = k0; k <= pair.horizon(); ++k) {
    rs.middleCols((k - k0) * n, n) = pair.R(k);
    ms.middleCols((k - k0) * n, n) = pair.M(k);
  }
  StaticGainFit out;
  out.K = Matrix::Zero(m, n);
  if (m > 0 && rs.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(rs.transpose());
    out.K = cod.solve(ms.transpose()).transpose();
  }
  out.residual = (ms - out.K * rs).norm();
  const double scale = ms.norm();
  out.relative_residual = scale > 0.0 ? out.residual / scale : 0.0;
  return out;
}

inline StaticGainFit to_static_gain_check(const SynthesisResult& result) { return to_static_gain_check(result.pair); }

}  // namespace slsmeso
