#pragma once

// Node-level realization of a strictly causal pair.
//
// Each node keeps a memory patch of delta_hat values from itself and from
// the sources its rows of R and M read. Values travel neighbor to neighbor
// along shortest paths; a directed topology link that carries at least one
// source is one communicative pathway and sends one message per step
// (the payload holds one scalar per source routed over it).

#include "slsmeso/constraints.hpp"
#include "slsmeso/plant.hpp"
#include "slsmeso/simulate.hpp"
#include "slsmeso/spectral.hpp"

#include <algorithm>
#include <climits>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace slsmeso {

struct PatchEntry {
  Index source = 0;
  int hops = 0;   ///< dist(source, owner)
  int delay = 0;  ///< steps between production and arrival
  int depth = 0;  ///< horizon - delay
};

struct NodeCircuit {
  Index id = 0;
  std::optional<Index> actuator;    ///< column of B at this node
  std::vector<PatchEntry> patch;    ///< sorted by source; always contains the node itself
  std::vector<Index> in_links;      ///< neighbors that send to this node
  std::vector<Index> out_links;     ///< neighbors this node sends to
  Matrix r_local;                   ///< row k-1 holds R(k)(id, patch sources), k = 1..T
  Matrix m_local;                   ///< row k-1 holds M(k)(actuator, patch sources); empty when unactuated

  bool actuated() const { return actuator.has_value(); }
  /// Sources other than the node itself.
  Index remote_sources() const { return static_cast<Index>(patch.size()) - 1; }
};

struct Link {
  Index from = 0;
  Index to = 0;
  int delay = 0;
  std::vector<std::pair<Index, int>> sources;  ///< (source, dist(source, from)), sorted by source
};

struct Mesocircuit {
  Index n = 0;
  Index m = 0;
  int horizon = 0;
  int comm_delay = 0;
  std::vector<NodeCircuit> nodes;
  std::vector<Link> links;  ///< sorted by (from, to)
};

namespace detail {

inline Index next_hop(const Topology& topo, const Eigen::MatrixXi& dist, Index at, Index target) {
  for (Index nb : topo.neighbors(at))
    if (dist(nb, target) == dist(at, target) - 1) return nb;
  throw SolverError("mesocircuit: no shortest-path hop toward node " + std::to_string(target + 1));
}

}  // namespace detail

/// Builds node circuits. Sources are the columns of node i's rows of R(k),
/// k >= 2, and M(k), k >= 1, with magnitude above `zero_tol`; smaller
/// coefficients are dropped, so the circuit realizes prune(pair, zero_tol)
/// exactly. Link delay per hop comes from the support's comm_delay.
inline Mesocircuit build_mesocircuit(const LinearSystem& sys, const FIRPair& pair, const SupportSpec& support,
                                     double zero_tol = kRealizationTol) {
  require_sls_realizable(pair);
  require(pair.states() == sys.states() && pair.inputs() == sys.inputs(),
          "build_mesocircuit: pair and plant dimensions differ");
  require(support.matches(pair), "build_mesocircuit: support does not match pair shape");
  const MaskCheck mc = check_mask(pair, support, 0.0);
  if (!mc.ok) {
    const MaskViolation& v = mc.violations.front();
    std::ostringstream os;
    os << "build_mesocircuit: pair violates its support (" << mc.violations.size() << " entries, first " << v.which
       << "(" << v.k << ")[" << v.row + 1 << "," << v.col + 1 << "])";
    throw InvalidArgument(os.str());
  }
  const Index n = sys.states();
  const int T = pair.horizon();
  const int c = support.provenance.comm_delay;
  require(c >= 0, "build_mesocircuit: negative comm delay");
  const Eigen::MatrixXi dist = distance_matrix(sys.topology());

  Mesocircuit mc_out;
  mc_out.n = n;
  mc_out.m = sys.inputs();
  mc_out.horizon = T;
  mc_out.comm_delay = c;

  std::map<std::pair<Index, Index>, std::map<Index, int>> link_sources;
  for (Index i = 0; i < n; ++i) {
    NodeCircuit node;
    node.id = i;
    node.actuator = sys.actuator_of(i);
    // Smallest k at which each source is read; used for the causality check.
    std::map<Index, int> first_use;
    first_use[i] = 1;
    auto note = [&](Index j, int k) {
      auto it = first_use.find(j);
      if (it == first_use.end() || k < it->second) first_use[j] = k;
    };
    for (int k = 2; k <= T; ++k)
      for (Index j = 0; j < n; ++j)
        if (std::abs(pair.R(k)(i, j)) > zero_tol) note(j, k);
    if (node.actuator)
      for (int k = 1; k <= T; ++k)
        for (Index j = 0; j < n; ++j)
          if (std::abs(pair.M(k)(*node.actuator, j)) > zero_tol) note(j, k);

    for (const auto& [j, k] : first_use) {
      const int hops = dist(i, j);
      if (hops < 0)
        throw InvalidArgument("build_mesocircuit: node " + std::to_string(i + 1) + " reads unreachable node " +
                              std::to_string(j + 1));
      const int delay = c * hops;
      if (k - 1 < delay) {
        std::ostringstream os;
        os << "build_mesocircuit: node " << i + 1 << " reads delta_hat of node " << j + 1 << " at lag " << k - 1
           << " but it arrives after " << delay << " steps";
        throw InvalidArgument(os.str());
      }
      node.patch.push_back({j, hops, delay, T - delay});
    }
    const Index p = static_cast<Index>(node.patch.size());
    node.r_local = Matrix::Zero(T, p);
    if (node.actuator) node.m_local = Matrix::Zero(T, p);
    for (Index q = 0; q < p; ++q) {
      const Index j = node.patch[static_cast<std::size_t>(q)].source;
      for (int k = 1; k <= T; ++k) {
        const double rv = pair.R(k)(i, j);
        if (k >= 2 && std::abs(rv) > zero_tol) node.r_local(k - 1, q) = rv;
        if (node.actuator) {
          const double mv = pair.M(k)(*node.actuator, j);
          if (std::abs(mv) > zero_tol) node.m_local(k - 1, q) = mv;
        }
      }
    }
    // R(1) = I is implicit in delta_hat = x - x_hat.
    node.r_local.row(0).setZero();

    for (const PatchEntry& e : node.patch) {
      Index at = e.source;
      while (at != i) {
        const Index nx = detail::next_hop(sys.topology(), dist, at, i);
        link_sources[{at, nx}][e.source] = dist(e.source, at);
        at = nx;
      }
    }
    mc_out.nodes.push_back(std::move(node));
  }

  for (const auto& [key, srcs] : link_sources) {
    Link l;
    l.from = key.first;
    l.to = key.second;
    l.delay = c;
    for (const auto& [s, h] : srcs) l.sources.emplace_back(s, h);
    mc_out.nodes[static_cast<std::size_t>(l.from)].out_links.push_back(l.to);
    mc_out.nodes[static_cast<std::size_t>(l.to)].in_links.push_back(l.from);
    mc_out.links.push_back(std::move(l));
  }
  return mc_out;
}

struct Message {
  int t_send = 0;
  int t_deliver = 0;
  Index from = 0;
  Index to = 0;
  std::vector<std::pair<Index, double>> payload;  ///< (source, delta_hat value)
};

using MessageLog = std::vector<Message>;

struct DistributedRun {
  Trajectory traj;
  MessageLog log;
};

/// Message count per send step t = 0..steps-1.
inline std::vector<int> messages_per_step(const MessageLog& log, int steps) {
  std::vector<int> out(static_cast<std::size_t>(std::max(steps, 0)), 0);
  for (const Message& msg : log)
    if (msg.t_send >= 0 && msg.t_send < steps) ++out[static_cast<std::size_t>(msg.t_send)];
  return out;
}

namespace detail {

// Newest-first buffer of one source's values at one node.
struct PatchBuffer {
  std::deque<double> vals;
  int newest_origin = INT_MIN;
  int depth = 0;
};

class MesoRuntime {
 public:
  MesoRuntime(const Mesocircuit& mc) : mc_(mc) {
    patches_.resize(static_cast<std::size_t>(mc.n));
    latest_.resize(static_cast<std::size_t>(mc.n));
    for (const NodeCircuit& node : mc.nodes)
      for (const PatchEntry& e : node.patch) {
        PatchBuffer b;
        b.depth = e.depth;
        patches_[static_cast<std::size_t>(node.id)].push_back(std::move(b));
      }
  }

  void deliver(Index to, Index source, int origin, double value) {
    latest_[static_cast<std::size_t>(to)][source] = {origin, value};
    const NodeCircuit& node = mc_.nodes[static_cast<std::size_t>(to)];
    for (std::size_t q = 0; q < node.patch.size(); ++q) {
      if (node.patch[q].source != source) continue;
      PatchBuffer& b = patches_[static_cast<std::size_t>(to)][q];
      if (b.newest_origin != INT_MIN && origin != b.newest_origin + 1) {
        std::ostringstream os;
        os << "simulate_distributed: node " << to + 1 << " received delta_hat of node " << source + 1
           << " out of order (origin " << origin << " after " << b.newest_origin << ")";
        throw SolverError(os.str());
      }
      b.vals.push_front(value);
      if (static_cast<int>(b.vals.size()) > b.depth) b.vals.pop_back();
      b.newest_origin = origin;
    }
  }

  /// delta_hat(t - lag) of patch entry q at node i.
  double read(Index i, std::size_t q, int t, int lag) const {
    const int origin = t - lag;
    if (origin < 0) return 0.0;
    const PatchBuffer& b = patches_[static_cast<std::size_t>(i)][q];
    const int idx = b.newest_origin == INT_MIN ? -1 : b.newest_origin - origin;
    if (idx < 0 || idx >= static_cast<int>(b.vals.size())) {
      const PatchEntry& e = mc_.nodes[static_cast<std::size_t>(i)].patch[q];
      std::ostringstream os;
      os << "simulate_distributed: memory patch underrun at node " << i + 1 << ", source " << e.source + 1
         << ", lag " << lag << " (patch depth " << e.depth << ", delay " << e.delay << ")";
      throw SolverError(os.str());
    }
    return b.vals[static_cast<std::size_t>(idx)];
  }

  double relay_value(Index at, Index source, int origin) const {
    if (origin < 0) return 0.0;
    const auto& known = latest_[static_cast<std::size_t>(at)];
    const auto it = known.find(source);
    if (it == known.end() || it->second.first != origin) {
      std::ostringstream os;
      os << "simulate_distributed: node " << at + 1 << " has no delta_hat of node " << source + 1 << " from time "
         << origin << " to forward";
      throw SolverError(os.str());
    }
    return it->second.second;
  }

 private:
  const Mesocircuit& mc_;
  std::vector<std::vector<PatchBuffer>> patches_;
  std::vector<std::map<Index, std::pair<int, double>>> latest_;
};

struct Pending {
  int t_deliver;
  Index to;
  Index source;
  int origin;
  double value;
};

}  // namespace detail

/// Lock-step rounds. Round t: deliver arrivals due at t; every node forms
/// x_hat_i(t) and delta_hat_i(t); links send by hop level (zero-delay links
/// deliver within the round); actuated nodes emit u_i(t); the plant advances.
inline DistributedRun simulate_distributed(const Mesocircuit& mc, const LinearSystem& sys,
                                           const std::vector<Vector>& w_seq, int steps,
                                           const std::optional<Vector>& x0 = std::nullopt) {
  require(mc.n == sys.states() && mc.m == sys.inputs(), "simulate_distributed: circuit and plant dimensions differ");
  const Index n = mc.n;
  const int T = mc.horizon;
  const int c = mc.comm_delay;
  DistributedRun run;
  Trajectory& tr = run.traj;
  tr.steps = steps;
  tr.w = detail::padded_disturbance(w_seq, steps, n);
  tr.x.push_back(detail::initial_state(x0, n));

  int max_level = 0;
  for (const Link& l : mc.links)
    for (const auto& sh : l.sources) max_level = std::max(max_level, sh.second);

  detail::MesoRuntime rt(mc);
  std::vector<detail::Pending> pending;

  for (int t = 0; t <= steps; ++t) {
    const auto s = static_cast<std::size_t>(t);
    std::vector<detail::Pending> later;
    for (const detail::Pending& p : pending) {
      if (p.t_deliver == t)
        rt.deliver(p.to, p.source, p.origin, p.value);
      else
        later.push_back(p);
    }
    pending.swap(later);

    Vector xh = Vector::Zero(n);
    Vector dh = Vector::Zero(n);
    for (const NodeCircuit& node : mc.nodes) {
      double acc = 0.0;
      for (int k = 2; k <= T; ++k)
        for (std::size_t q = 0; q < node.patch.size(); ++q) {
          const double coef = node.r_local(k - 1, static_cast<Index>(q));
          if (coef != 0.0) acc += coef * rt.read(node.id, q, t, k - 1);
        }
      xh(node.id) = acc;
      dh(node.id) = tr.x[s](node.id) - acc;
    }
    for (const NodeCircuit& node : mc.nodes) rt.deliver(node.id, node.id, t, dh(node.id));
    tr.x_hat.push_back(xh);
    tr.delta_hat.push_back(dh);
    if (t == steps) break;

    std::vector<Message> round(mc.links.size());
    for (std::size_t li = 0; li < mc.links.size(); ++li)
      round[li] = {t, t + c, mc.links[li].from, mc.links[li].to, {}};
    for (int h = 0; h <= max_level; ++h)
      for (std::size_t li = 0; li < mc.links.size(); ++li) {
        const Link& l = mc.links[li];
        for (const auto& [src, hops] : l.sources) {
          if (hops != h) continue;
          const int origin = t - c * h;
          const double v = rt.relay_value(l.from, src, origin);
          round[li].payload.emplace_back(src, v);
          if (c == 0)
            rt.deliver(l.to, src, origin, v);
          else
            pending.push_back({t + c, l.to, src, origin, v});
        }
      }
    for (Message& msg : round) {
      std::sort(msg.payload.begin(), msg.payload.end());
      run.log.push_back(std::move(msg));
    }

    Vector u = Vector::Zero(sys.inputs());
    for (const NodeCircuit& node : mc.nodes) {
      if (!node.actuator) continue;
      double acc = 0.0;
      for (int k = 1; k <= T; ++k)
        for (std::size_t q = 0; q < node.patch.size(); ++q) {
          const double coef = node.m_local(k - 1, static_cast<Index>(q));
          if (coef != 0.0) acc += coef * rt.read(node.id, q, t, k - 1);
        }
      u(*node.actuator) = acc;
    }
    tr.u.push_back(std::move(u));
    tr.x.push_back(sys.A() * tr.x[s] + sys.B() * tr.u[s] + tr.w[s]);
  }
  detail::check_dynamics(tr, sys);
  return run;
}

struct MesoReport {
  Index forward_paths = 0;
  Index predictive_ifps = 0;
  Index communicative_ifps = 0;       ///< directed links carrying delta_hat
  Index source_links = 0;             ///< sum over nodes of remote sources read
  std::vector<Index> in_links;        ///< per node
  std::vector<Index> remote_sources;  ///< per node
  std::optional<double> ratio;        ///< (predictive + communicative) / forward

  std::string ratio_text() const {
    if (!ratio) return "no forward paths";
    std::ostringstream os;
    os << *ratio;
    return os.str();
  }
};

inline MesoReport census(const Mesocircuit& mc) {
  MesoReport r;
  for (const NodeCircuit& node : mc.nodes) {
    if (node.actuated()) ++r.forward_paths;
    ++r.predictive_ifps;
    r.in_links.push_back(static_cast<Index>(node.in_links.size()));
    r.remote_sources.push_back(node.remote_sources());
    r.source_links += node.remote_sources();
  }
  r.communicative_ifps = static_cast<Index>(mc.links.size());
  if (r.forward_paths > 0)
    r.ratio = static_cast<double>(r.predictive_ifps + r.communicative_ifps) / static_cast<double>(r.forward_paths);
  return r;
}

struct MemoryReport {
  std::vector<std::vector<PatchEntry>> per_node;
  std::vector<Index> copies;  ///< per disturbance node: number of patches holding it
  Index total = 0;            ///< stored scalars, sum of depths
};

inline MemoryReport memory_report(const Mesocircuit& mc) {
  MemoryReport r;
  r.copies.assign(static_cast<std::size_t>(mc.n), 0);
  for (const NodeCircuit& node : mc.nodes) {
    r.per_node.push_back(node.patch);
    for (const PatchEntry& e : node.patch) {
      ++r.copies[static_cast<std::size_t>(e.source)];
      r.total += e.depth;
    }
  }
  return r;
}

}  // namespace slsmeso
