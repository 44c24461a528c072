#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace slsmeso {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Thrown when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot produce an answer
/// (divergence, non-convergence, degenerate factorization).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time-indexing of the spectral elements of a transfer pair.
///
/// `causal_m`: M(0) may be nonzero (disturbance feedback).
/// `strictly_causal`: R(0) = M(0) = 0 (state feedback).
/// R(0) is zero in both modes because the plant map is strictly proper.
enum class Causality { causal_m, strictly_causal };

inline int first_m_index(Causality c) { return c == Causality::causal_m ? 0 : 1; }

inline std::string to_string(Causality c) {
  return c == Causality::causal_m ? "causal_M" : "strictly_causal";
}

inline Causality causality_from_string(const std::string& s) {
  if (s == "causal_M" || s == "causal_m") return Causality::causal_m;
  if (s == "strictly_causal") return Causality::strictly_causal;
  throw InvalidArgument("unknown causality '" + s + "'");
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace slsmeso
