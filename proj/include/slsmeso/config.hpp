#pragma once

// Run configuration: everything needed to reproduce a synthesis or
// simulation run. Node labels are 1-based.

#include "slsmeso/constraints.hpp"
#include "slsmeso/io.hpp"
#include "slsmeso/plant.hpp"
#include "slsmeso/simulate.hpp"
#include "slsmeso/spectral.hpp"
#include "slsmeso/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace slsmeso {

enum class Method { lqr, mdesign, sls };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::lqr: return "lqr";
    case Method::mdesign: return "mdesign";
    case Method::sls: return "sls";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "lqr") return Method::lqr;
  if (s == "mdesign") return Method::mdesign;
  if (s == "sls") return Method::sls;
  throw InvalidArgument("unknown mode '" + s + "' (expected lqr, mdesign or sls)");
}

inline SynthesisMode synthesis_mode(Method m) {
  require(m != Method::lqr, "lqr is not a localized synthesis mode");
  return m == Method::mdesign ? SynthesisMode::mdesign : SynthesisMode::sls;
}

struct PlantConfig {
  std::optional<RingSpec> ring;
  // general form
  Mask adjacency;
  Matrix a;
  std::vector<int> actuated;
};

struct CostConfig {
  std::optional<Matrix> q;  ///< identity when unset
  double eps = 1e-6;
};

struct ScenarioConfig {
  std::string kind = "impulse";  ///< impulse | random | file | zero
  int node = 1;                  ///< impulse node label
  int time = 0;                  ///< impulse time
  std::string file;              ///< t,node,value csv for kind = file
  int steps = 30;
  double scale = 1.0;            ///< standard deviation for kind = random
};

struct RunConfig {
  PlantConfig plant;
  CostConfig cost;
  LocalityRule locality{2, 0, 0};
  std::optional<LocalityRule> r_locality;  ///< overrides `locality` for R masks
  std::optional<LocalityRule> m_locality;  ///< overrides `locality` for M masks
  int horizon = 20;
  Method mode = Method::sls;
  bool fir_closure = false;
  ScenarioConfig scenario;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  double zero_tol = kDefaultZeroTol;
  int threads = 1;
};

namespace detail {

inline LocalityRule rule_from_json(const nlohmann::json& j) {
  LocalityRule r;
  r.d = j.value("d", 0);
  r.comm_delay = j.value("comm_delay", 0);
  r.self_delay = j.value("self_delay", 0);
  require(r.d >= 0 && r.comm_delay >= 0 && r.self_delay >= 0, "config: locality values must be nonnegative");
  return r;
}

inline nlohmann::json rule_to_json(const LocalityRule& r) {
  return {{"d", r.d}, {"comm_delay", r.comm_delay}, {"self_delay", r.self_delay}};
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  try {
    RunConfig c;
    const json& p = j.at("plant");
    if (p.contains("ring")) {
      const json& r = p["ring"];
      RingSpec rs;
      rs.n = r.value("n", 8);
      rs.a = r.value("a", 1.8);
      rs.actuated = r.at("actuated").get<std::vector<int>>();
      c.plant.ring = rs;
    } else if (p.contains("general")) {
      const json& g = p["general"];
      const Matrix adj = io::matrix_from_json(g.at("adjacency"), "plant.general.adjacency");
      c.plant.adjacency = adj.array() != 0.0;
      c.plant.a = io::matrix_from_json(g.at("A"), "plant.general.A");
      c.plant.actuated = g.at("actuated").get<std::vector<int>>();
    } else {
      throw InvalidArgument("config: plant needs a 'ring' or 'general' entry");
    }
    if (j.contains("cost")) {
      const json& q = j["cost"];
      c.cost.eps = q.value("eps", 1e-6);
      if (q.contains("Q") && !(q["Q"].is_string() && q["Q"].get<std::string>() == "identity")) {
        if (q["Q"].is_string()) throw InvalidArgument("config: cost.Q must be \"identity\" or a matrix");
        c.cost.q = io::matrix_from_json(q["Q"], "cost.Q");
      }
    }
    if (j.contains("locality")) c.locality = detail::rule_from_json(j["locality"]);
    if (j.contains("locality_R")) c.r_locality = detail::rule_from_json(j["locality_R"]);
    if (j.contains("locality_M")) c.m_locality = detail::rule_from_json(j["locality_M"]);
    c.horizon = j.value("horizon", c.horizon);
    require(c.horizon >= 1, "config: horizon must be positive");
    c.mode = method_from_string(j.value("mode", std::string("sls")));
    c.fir_closure = j.value("fir_closure", false);
    if (j.contains("scenario")) {
      const json& s = j["scenario"];
      c.scenario.steps = s.value("steps", c.scenario.steps);
      require(c.scenario.steps >= 1, "config: scenario.steps must be positive");
      if (s.contains("impulse")) {
        c.scenario.kind = "impulse";
        c.scenario.node = s["impulse"].at("node").get<int>();
        c.scenario.time = s["impulse"].value("t", 0);
      } else if (s.contains("random")) {
        c.scenario.kind = "random";
        c.scenario.scale = s["random"].value("scale", 1.0);
      } else if (s.contains("file")) {
        c.scenario.kind = "file";
        c.scenario.file = s["file"].get<std::string>();
      } else if (s.value("zero", false)) {
        c.scenario.kind = "zero";
      }
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", std::uint64_t{0});
    c.zero_tol = j.value("zero_tol", kDefaultZeroTol);
    require(c.zero_tol >= 0.0, "config: zero_tol must be nonnegative");
    c.threads = j.value("threads", 1);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  } catch (const io::FormatError& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  if (c.plant.ring) {
    j["plant"]["ring"] = {{"n", c.plant.ring->n}, {"a", c.plant.ring->a}, {"actuated", c.plant.ring->actuated}};
  } else {
    j["plant"]["general"] = {{"adjacency", io::matrix_to_json(c.plant.adjacency.cast<double>().matrix())},
                             {"A", io::matrix_to_json(c.plant.a)},
                             {"actuated", c.plant.actuated}};
  }
  j["cost"]["eps"] = c.cost.eps;
  j["cost"]["Q"] = c.cost.q ? io::matrix_to_json(*c.cost.q) : json("identity");
  j["locality"] = detail::rule_to_json(c.locality);
  if (c.r_locality) j["locality_R"] = detail::rule_to_json(*c.r_locality);
  if (c.m_locality) j["locality_M"] = detail::rule_to_json(*c.m_locality);
  j["horizon"] = c.horizon;
  j["mode"] = to_string(c.mode);
  j["fir_closure"] = c.fir_closure;
  json s;
  s["steps"] = c.scenario.steps;
  if (c.scenario.kind == "impulse")
    s["impulse"] = {{"node", c.scenario.node}, {"t", c.scenario.time}};
  else if (c.scenario.kind == "random")
    s["random"] = {{"scale", c.scenario.scale}};
  else if (c.scenario.kind == "file")
    s["file"] = c.scenario.file;
  else
    s["zero"] = true;
  j["scenario"] = std::move(s);
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["zero_tol"] = c.zero_tol;
  j["threads"] = c.threads;
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  } catch (const io::FormatError& e) {
    throw InvalidArgument(e.what());
  }
  return config_from_json(j);
}

inline LinearSystem build_system(const RunConfig& c) {
  if (c.plant.ring) return build_ring(*c.plant.ring);
  const Index n = c.plant.adjacency.rows();
  std::vector<Index> act;
  for (int label : c.plant.actuated) {
    require(label >= 1 && label <= n, "config: actuated node " + std::to_string(label) + " out of range");
    act.push_back(label - 1);
  }
  LinearSystem sys(Topology(c.plant.adjacency), c.plant.a, std::move(act));
  const ValidationReport rep = validate_system(sys);
  if (!rep.ok) throw InvalidArgument("config: invalid plant: " + rep.issues.front());
  return sys;
}

inline CostSpec build_cost(const RunConfig& c, Index n) {
  if (c.cost.q) return CostSpec(*c.cost.q, c.cost.eps);
  return CostSpec::identity(n, c.cost.eps);
}

inline SupportSpec build_support(const RunConfig& c, const LinearSystem& sys, Method m) {
  const LocalityRule r_rule = c.r_locality.value_or(c.locality);
  const LocalityRule m_rule = c.m_locality.value_or(c.locality);
  return locality_support(sys, r_rule, m_rule, c.horizon, causality_of(synthesis_mode(m)));
}

inline SynthesisProblem build_problem(const RunConfig& c, const LinearSystem& sys, Method m) {
  SynthesisOptions opt;
  opt.fir_closure = c.fir_closure;
  opt.threads = c.threads;
  return {sys, build_cost(c, sys.states()), build_support(c, sys, m), synthesis_mode(m), opt};
}

/// Disturbance sequence of the configured scenario. Relative file paths
/// resolve against `base`.
inline std::vector<Vector> build_disturbance(const RunConfig& c, Index n,
                                             const std::filesystem::path& base = {}) {
  const ScenarioConfig& s = c.scenario;
  if (s.kind == "impulse") {
    require(s.node >= 1 && s.node <= n, "scenario: impulse node " + std::to_string(s.node) + " out of range");
    return impulse_disturbance(n, s.node - 1, s.time, s.steps);
  }
  if (s.kind == "random") {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> dist(0.0, s.scale);
    std::vector<Vector> w(static_cast<std::size_t>(s.steps), Vector::Zero(n));
    for (auto& v : w)
      for (Index i = 0; i < n; ++i) v(i) = dist(rng);
    return w;
  }
  if (s.kind == "file") {
    std::filesystem::path p(s.file);
    if (p.is_relative() && !base.empty()) p = base / p;
    try {
      return io::read_disturbance_csv(io::read_file(p), n, s.steps);
    } catch (const io::FormatError& e) {
      throw InvalidArgument(std::string("scenario: ") + e.what());
    }
  }
  return std::vector<Vector>(static_cast<std::size_t>(s.steps), Vector::Zero(n));
}

}  // namespace slsmeso
