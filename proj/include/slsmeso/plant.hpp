#pragma once

// Linear plants over undirected graph topologies.
//
// Node indices in this C++ API are 0-based. Configuration files, CSV
// exports and the CLI use 1-based node labels; RingSpec follows the
// external convention since it is the config-facing constructor.

#include "slsmeso/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace slsmeso {

class Topology {
 public:
  Topology() = default;

  /// `adjacency` must be square and symmetric; the diagonal is ignored.
  explicit Topology(Mask adjacency) : adj_(std::move(adjacency)) {
    require(adj_.rows() == adj_.cols() && adj_.rows() > 0,
            "Topology: adjacency must be square and non-empty");
    for (Index i = 0; i < adj_.rows(); ++i) {
      adj_(i, i) = false;
      for (Index j = 0; j < i; ++j)
        require(adj_(i, j) == adj_(j, i), "Topology: adjacency must be symmetric");
    }
    build_neighbors();
  }

  static Topology ring(Index n) {
    require(n >= 3, "Topology::ring: need at least 3 nodes");
    Mask adj = Mask::Constant(n, n, false);
    for (Index i = 0; i < n; ++i) {
      adj(i, (i + 1) % n) = true;
      adj((i + 1) % n, i) = true;
    }
    return Topology(std::move(adj));
  }

  Index node_count() const { return adj_.rows(); }
  bool adjacent(Index i, Index j) const { return adj_(i, j); }
  const Mask& adjacency() const { return adj_; }

  /// Neighbors of `i` in ascending order.
  const std::vector<Index>& neighbors(Index i) const {
    return neighbors_[static_cast<std::size_t>(i)];
  }

  Index edge_count() const { return static_cast<Index>(adj_.count() / 2); }

 private:
  void build_neighbors() {
    neighbors_.assign(static_cast<std::size_t>(adj_.rows()), {});
    for (Index i = 0; i < adj_.rows(); ++i)
      for (Index j = 0; j < adj_.cols(); ++j)
        if (adj_(i, j)) neighbors_[static_cast<std::size_t>(i)].push_back(j);
  }

  Mask adj_;
  std::vector<std::vector<Index>> neighbors_;
};

/// Hop distance; std::nullopt when the pair is disconnected.
using HopDistance = std::optional<int>;

inline std::vector<HopDistance> bfs_distances(const Topology& topo, Index source) {
  const Index n = topo.node_count();
  require(source >= 0 && source < n, "bfs_distances: node out of range");
  std::vector<HopDistance> dist(static_cast<std::size_t>(n));
  std::queue<Index> frontier;
  dist[static_cast<std::size_t>(source)] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const Index v = frontier.front();
    frontier.pop();
    const int dv = *dist[static_cast<std::size_t>(v)];
    for (Index w : topo.neighbors(v)) {
      auto& dw = dist[static_cast<std::size_t>(w)];
      if (!dw) {
        dw = dv + 1;
        frontier.push(w);
      }
    }
  }
  return dist;
}

inline HopDistance hop_distance(const Topology& topo, Index i, Index j) {
  require(j >= 0 && j < topo.node_count(), "hop_distance: node out of range");
  return bfs_distances(topo, i)[static_cast<std::size_t>(j)];
}

/// All-pairs hop distances, -1 marking unreachable pairs.
inline Eigen::MatrixXi distance_matrix(const Topology& topo) {
  const Index n = topo.node_count();
  Eigen::MatrixXi d(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto row = bfs_distances(topo, i);
    for (Index j = 0; j < n; ++j) d(i, j) = row[static_cast<std::size_t>(j)].value_or(-1);
  }
  return d;
}

inline int diameter(const Topology& topo) {
  const auto d = distance_matrix(topo);
  return d.maxCoeff();
}

inline double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// x(t+1) = A x(t) + B u(t) + w(t) over a topology.
class LinearSystem {
 public:
  LinearSystem() = default;

  /// `actuated` lists the node driven by each column of B (0-based).
  LinearSystem(Topology topology, Matrix a, std::vector<Index> actuated)
      : topo_(std::move(topology)), a_(std::move(a)), actuated_(std::move(actuated)) {
    const Index n = topo_.node_count();
    require(a_.rows() == n && a_.cols() == n, "LinearSystem: A must be n x n");
    std::vector<Index> sorted = actuated_;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "LinearSystem: duplicated actuated node");
    b_ = Matrix::Zero(n, static_cast<Index>(actuated_.size()));
    actuator_of_.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < actuated_.size(); ++c) {
      const Index node = actuated_[c];
      require(node >= 0 && node < n, "LinearSystem: actuated node out of range");
      b_(node, static_cast<Index>(c)) = 1.0;
      actuator_of_[static_cast<std::size_t>(node)] = static_cast<Index>(c);
    }
  }

  /// Unchecked constructor used by validate_system tests and config
  /// loaders that want a report instead of an exception.
  static LinearSystem raw(Topology topology, Matrix a, Matrix b) {
    LinearSystem s;
    s.topo_ = std::move(topology);
    s.a_ = std::move(a);
    s.b_ = std::move(b);
    s.actuator_of_.assign(static_cast<std::size_t>(s.a_.rows()), -1);
    for (Index c = 0; c < s.b_.cols(); ++c) {
      Index row = -1;
      for (Index r = 0; r < s.b_.rows(); ++r)
        if (s.b_(r, c) != 0.0) row = r;
      s.actuated_.push_back(row);
      if (row >= 0) s.actuator_of_[static_cast<std::size_t>(row)] = c;
    }
    return s;
  }

  const Topology& topology() const { return topo_; }
  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  Index states() const { return a_.rows(); }
  Index inputs() const { return b_.cols(); }
  const std::vector<Index>& actuated() const { return actuated_; }

  /// Column of B driving `node`, if any.
  std::optional<Index> actuator_of(Index node) const {
    const Index c = actuator_of_[static_cast<std::size_t>(node)];
    return c < 0 ? std::nullopt : std::optional<Index>(c);
  }

 private:
  Topology topo_;
  Matrix a_;
  Matrix b_;
  std::vector<Index> actuated_;
  std::vector<Index> actuator_of_;
};

/// Symmetric ring benchmark: A = (a/3) * (self + both neighbors).
struct RingSpec {
  int n = 8;
  double a = 1.8;
  std::vector<int> actuated;  ///< 1-based node labels
};

inline LinearSystem build_ring(const RingSpec& spec) {
  require(spec.n >= 3, "build_ring: n must be at least 3");
  require(spec.a > 0.0, "build_ring: a must be positive");
  const Index n = spec.n;
  Topology topo = Topology::ring(n);
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = spec.a / 3.0;
    a(i, (i + 1) % n) = spec.a / 3.0;
    a(i, (i + n - 1) % n) = spec.a / 3.0;
  }
  std::vector<Index> act;
  for (int label : spec.actuated) {
    require(label >= 1 && label <= spec.n,
            "build_ring: actuated node " + std::to_string(label) + " out of range");
    act.push_back(label - 1);
  }
  return LinearSystem(std::move(topo), std::move(a), std::move(act));
}

struct ValidationReport {
  bool ok = true;
  double spectral_radius = 0.0;
  std::vector<std::string> issues;
  std::vector<std::string> warnings;
};

inline ValidationReport validate_system(const LinearSystem& sys) {
  ValidationReport rep;
  const Index n = sys.states();
  const auto& topo = sys.topology();
  if (sys.A().rows() != n || sys.A().cols() != n || topo.node_count() != n) {
    rep.ok = false;
    rep.issues.push_back("dimension mismatch between A and topology");
    return rep;
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && sys.A()(i, j) != 0.0 && !topo.adjacent(i, j)) {
        std::ostringstream os;
        os << "sparsity violation: A(" << i + 1 << "," << j + 1
           << ") nonzero but nodes are not adjacent";
        rep.issues.push_back(os.str());
      }
  std::vector<Index> seen;
  for (Index c = 0; c < sys.B().cols(); ++c) {
    int ones = 0;
    bool binary = true;
    Index row = -1;
    for (Index r = 0; r < sys.B().rows(); ++r) {
      const double v = sys.B()(r, c);
      if (v == 1.0) {
        ++ones;
        row = r;
      } else if (v != 0.0) {
        binary = false;
      }
    }
    if (!binary || ones != 1) {
      rep.issues.push_back("malformed actuation: column " + std::to_string(c + 1) +
                           " of B is not a standard basis vector");
    } else if (std::find(seen.begin(), seen.end(), row) != seen.end()) {
      rep.issues.push_back("malformed actuation: node " + std::to_string(row + 1) +
                           " actuated twice");
    } else {
      seen.push_back(row);
    }
  }
  rep.spectral_radius = spectral_radius(sys.A());
  if (rep.spectral_radius >= 1.0) {
    // Heuristic only: an unstable mode on a node set with no actuator in
    // its connected component cannot be stabilized.
    const auto dist = distance_matrix(topo);
    for (Index i = 0; i < n; ++i) {
      bool reachable = false;
      for (Index node : seen) reachable = reachable || dist(i, node) >= 0;
      if (!reachable) {
        rep.warnings.push_back("node " + std::to_string(i + 1) +
                               " has no actuator in its component; plant may not be stabilizable");
        break;
      }
    }
  }
  rep.ok = rep.issues.empty();
  return rep;
}

}  // namespace slsmeso
