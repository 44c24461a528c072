#include "generators.hpp"
#include "oracles.hpp"

#include "slsmeso/lqr.hpp"
#include "slsmeso/simulate.hpp"
#include "slsmeso/synthesis.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace slsmeso;

namespace {

LinearSystem ring8() { return build_ring({8, 1.8, {1, 3, 5, 7}}); }
const CostSpec kCost = CostSpec::identity(8, 1e-6);

// Exact FIR pair (closure enforced) on a fully actuated random plant.
struct ExactCase {
  LinearSystem sys;
  FIRPair pair;
};

ExactCase exact_case(std::mt19937_64& rng, Index n, int T, SynthesisMode mode) {
  const Mask adj = gen::random_connected(rng, n, 2);
  LinearSystem sys(Topology(adj), gen::random_dynamics(rng, adj, 1.4), gen::all_nodes(n));
  SynthesisOptions opt;
  opt.fir_closure = true;
  const SynthesisResult r = synthesize(make_problem(sys, CostSpec::identity(n, 1e-3), {1, 0, 0}, T, mode, opt));
  REQUIRE(r.ok());
  return {sys, r.pair};
}

const SynthesisResult& benchmark(SynthesisMode mode) {
  static const SynthesisResult sls = synthesize(make_problem(ring8(), kCost, {2, 0, 1}, 30, SynthesisMode::sls));
  static const SynthesisResult md = synthesize(make_problem(ring8(), kCost, {2, 0, 1}, 30, SynthesisMode::mdesign));
  return mode == SynthesisMode::sls ? sls : md;
}

}  // namespace

TEST_CASE("FIR memory shifts newest first") {
  FirMemory mem(3, 1);
  for (int v = 1; v <= 5; ++v) mem.push(Vector::Constant(1, v));
  CHECK(mem.at(0)(0) == 5.0);
  CHECK(mem.at(1)(0) == 4.0);
  CHECK(mem.at(2)(0) == 3.0);
  CHECK_THROWS(mem.at(3));
  FirMemory none(0, 2);
  none.push(Vector::Ones(2));
  CHECK(none.depth() == 0);
}

TEST_CASE("open loop from an initial state is a matrix power") {
  const LinearSystem sys = ring8();
  const Trajectory tr = simulate_static(sys, Matrix::Zero(4, 8), {}, 6, Vector::Unit(8, 0));
  Vector x = Vector::Unit(8, 0);
  for (int t = 0; t <= 6; ++t) {
    CHECK((tr.x[static_cast<std::size_t>(t)] - x).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, x.norm()));
    x = sys.A() * x;
  }
}

TEST_CASE("LQR impulse equals closed loop spectral columns and spreads everywhere") {
  const LinearSystem sys = ring8();
  const Matrix k = solve_dare(sys, kCost).K;
  const Trajectory tr = simulate_static(sys, k, impulse_disturbance(8, 3, 0, 20), 20);
  const ImpulseColumns ic = impulse_columns(closed_loop_fir(sys, k, 20).pair, 3);
  for (int t = 1; t <= 20; ++t) CHECK((tr.x[static_cast<std::size_t>(t)] - ic.x[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <= 1e-10);
  for (int t = 1; t < 20; ++t) CHECK((tr.u[static_cast<std::size_t>(t)] - ic.u[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <= 1e-10);
  const LocalizationReport rep = localization_radius(tr, 3, sys, 1e-6);
  CHECK(rep.radius == 4);
  CHECK(rep.active.size() == 8);
  for (const auto& f : rep.first_active) CHECK((f && *f <= 4));
}

TEST_CASE("zero disturbance keeps every signal at zero") {
  std::mt19937_64 rng(1);
  const ExactCase c = exact_case(rng, 6, 4, SynthesisMode::sls);
  const Trajectory tr = simulate_sls(c.sys, c.pair, {}, 10);
  for (const Vector& x : tr.x) CHECK(x.isZero(0.0));
  for (const Vector& u : tr.u) CHECK(u.isZero(0.0));
  const LocalizationReport rep = localization_radius(tr, 2, c.sys, 1e-12);
  CHECK(rep.radius == 0);
  CHECK(rep.active.empty());
}

TEST_CASE("SLS estimates are exact for exact FIR pairs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    const ExactCase c = exact_case(rng, 5 + trial, 3 + trial % 3, SynthesisMode::sls);
    const Index n = c.sys.states();
    auto w = oracle::random_sequence(rng, n, 100);
    for (int t = 10; t < 20; ++t) w[static_cast<std::size_t>(t)].setZero();
    const Trajectory tr = simulate_sls(c.sys, c.pair, w, 100);
    REQUIRE(tr.has_internal());
    CHECK(tr.delta_hat[0].isZero(0.0));
    for (int t = 1; t <= 100; ++t)
      CHECK((tr.delta_hat[static_cast<std::size_t>(t)] - w[static_cast<std::size_t>(t - 1)]).cwiseAbs().maxCoeff() <= 1e-9);
    for (int t = 10; t < 20; ++t)
      CHECK((tr.x_hat[static_cast<std::size_t>(t + 1)] - tr.x[static_cast<std::size_t>(t + 1)]).cwiseAbs().maxCoeff() <= 1e-9);
    const auto [xs, us] = oracle::superpose(c.pair, w, 100);
    CHECK(oracle::max_abs_diff(tr.x, xs) <= 1e-9);
    CHECK(oracle::max_abs_diff(tr.u, us) <= 1e-9);
  }
}

TEST_CASE("impulse responses equal spectral columns") {
  std::mt19937_64 rng(3);
  for (SynthesisMode mode : {SynthesisMode::sls, SynthesisMode::mdesign}) {
    const ExactCase c = exact_case(rng, 7, 5, mode);
    for (Index i = 0; i < 7; ++i) {
      const int steps = 5;
      const auto w = impulse_disturbance(7, i, 0, steps);
      const Trajectory tr = mode == SynthesisMode::sls ? simulate_sls(c.sys, c.pair, w, steps)
                                                       : simulate_mdesign(c.sys, c.pair, w, steps);
      const ImpulseColumns ic = impulse_columns(c.pair, i);
      for (int t = 0; t <= steps; ++t)
        CHECK((tr.x[static_cast<std::size_t>(t)] - ic.x[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <= 1e-10);
      for (int t = 0; t < steps; ++t)
        CHECK((tr.u[static_cast<std::size_t>(t)] - ic.u[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("simulations are linear in the disturbance") {
  std::mt19937_64 rng(4);
  const ExactCase s = exact_case(rng, 6, 4, SynthesisMode::sls);
  const ExactCase m = exact_case(rng, 6, 4, SynthesisMode::mdesign);
  const auto w1 = oracle::random_sequence(rng, 6, 30);
  const auto w2 = oracle::random_sequence(rng, 6, 30);
  std::vector<Vector> sum;
  for (std::size_t t = 0; t < w1.size(); ++t) sum.push_back(w1[t] + w2[t]);
  auto check = [](const Trajectory& a, const Trajectory& b, const Trajectory& ab) {
    for (std::size_t t = 0; t < ab.x.size(); ++t) CHECK((ab.x[t] - a.x[t] - b.x[t]).cwiseAbs().maxCoeff() <= 1e-9);
    for (std::size_t t = 0; t < ab.u.size(); ++t) CHECK((ab.u[t] - a.u[t] - b.u[t]).cwiseAbs().maxCoeff() <= 1e-9);
  };
  check(simulate_sls(s.sys, s.pair, w1, 30), simulate_sls(s.sys, s.pair, w2, 30), simulate_sls(s.sys, s.pair, sum, 30));
  check(simulate_mdesign(m.sys, m.pair, w1, 30), simulate_mdesign(m.sys, m.pair, w2, 30),
        simulate_mdesign(m.sys, m.pair, sum, 30));
}

TEST_CASE("initial state acts as a disturbance one step earlier") {
  std::mt19937_64 rng(5);
  const ExactCase s = exact_case(rng, 6, 4, SynthesisMode::sls);
  const ExactCase m = exact_case(rng, 6, 4, SynthesisMode::mdesign);
  const Vector x0 = oracle::random_matrix(rng, 6, 1);
  const auto w = oracle::random_sequence(rng, 6, 12);
  std::vector<Vector> shifted{x0};
  shifted.insert(shifted.end(), w.begin(), w.end());
  const Trajectory a = simulate_sls(s.sys, s.pair, w, 12, x0);
  const Trajectory b = simulate_sls(s.sys, s.pair, shifted, 13);
  for (int t = 0; t <= 12; ++t)
    CHECK((a.x[static_cast<std::size_t>(t)] - b.x[static_cast<std::size_t>(t + 1)]).cwiseAbs().maxCoeff() <= 1e-12);
  const Trajectory c = simulate_mdesign(m.sys, m.pair, w, 12, x0);
  const Trajectory d = simulate_mdesign(m.sys, m.pair, shifted, 13);
  // the controller sees x0 as the disturbance of time -1
  for (int t = 0; t < 12; ++t) {
    CHECK((c.u[static_cast<std::size_t>(t)] - d.u[static_cast<std::size_t>(t + 1)]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("benchmark impulse at node 4 stays on nodes 3 to 5") {
  const LinearSystem sys = ring8();
  for (SynthesisMode mode : {SynthesisMode::sls, SynthesisMode::mdesign}) {
    const SynthesisResult& r = benchmark(mode);
    REQUIRE(r.ok());
    const auto w = impulse_disturbance(8, 3, 0, 30);
    const Trajectory tr = mode == SynthesisMode::sls ? simulate_sls(sys, r.pair, w, 30) : simulate_mdesign(sys, r.pair, w, 30);
    const LocalizationReport rep = localization_radius(tr, 3, sys, 1e-6);
    CHECK(rep.active == std::vector<Index>{2, 3, 4});
    CHECK(rep.state_active == std::vector<Index>{3});
    CHECK(rep.actuator_active == std::vector<Index>{2, 4});
    CHECK(rep.radius == 1);
    CHECK_FALSE(rep.unreachable_activity);
  }
}

TEST_CASE("benchmark SLS matches spectral superposition within the window") {
  const LinearSystem sys = ring8();
  const SynthesisResult& r = benchmark(SynthesisMode::sls);
  std::mt19937_64 rng(6);
  const auto w = oracle::random_sequence(rng, 8, 30);
  const Trajectory tr = simulate_sls(sys, r.pair, w, 30);
  const auto [xs, us] = oracle::superpose(r.pair, w, 30);
  // the residual mass past T reenters through delta_hat; bounded by the tail
  CHECK(oracle::max_abs_diff(tr.x, xs) <= 1e-5);
  CHECK(oracle::max_abs_diff(tr.u, us) <= 1e-5);
}

TEST_CASE("simulator input validation") {
  const LinearSystem sys = ring8();
  FIRPair not_identity(8, 4, 3, Causality::strictly_causal);
  CHECK_THROWS_AS(simulate_sls(sys, not_identity, {}, 3), InvalidArgument);
  FIRPair causal(8, 4, 3, Causality::causal_m);
  causal.R_mut(1) = Matrix::Identity(8, 8);
  CHECK_THROWS_AS(simulate_sls(sys, causal, {}, 3), InvalidArgument);
  CHECK_THROWS_AS(simulate_static(sys, Matrix::Zero(3, 8), {}, 3), InvalidArgument);
  CHECK_THROWS_AS(simulate_mdesign(sys, FIRPair(7, 4, 3, Causality::causal_m), {}, 3), InvalidArgument);
  CHECK_THROWS_AS(simulate_static(sys, Matrix::Zero(4, 8), {Vector::Zero(7)}, 3), InvalidArgument);
  CHECK_THROWS_AS(impulse_disturbance(8, 8, 0, 5), InvalidArgument);
  CHECK_THROWS_AS(impulse_disturbance(8, 0, 5, 5), InvalidArgument);
}

TEST_CASE("dynamics residual detects a tampered trajectory") {
  const LinearSystem sys = ring8();
  std::mt19937_64 rng(7);
  Trajectory tr = simulate_static(sys, Matrix::Zero(4, 8), oracle::random_sequence(rng, 8, 5), 5);
  CHECK(dynamics_residual(tr, sys) <= 1e-12);
  tr.x[3](2) += 1e-3;
  CHECK(dynamics_residual(tr, sys) > 1e-10);
}
