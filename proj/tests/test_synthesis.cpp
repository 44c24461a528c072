#include "generators.hpp"
#include "oracles.hpp"

#include "slsmeso/constraints.hpp"
#include "slsmeso/lqr.hpp"
#include "slsmeso/synthesis.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace slsmeso;

namespace {

LinearSystem ring8() { return build_ring({8, 1.8, {1, 3, 5, 7}}); }
LinearSystem ring8_full() { return build_ring({8, 1.8, {1, 2, 3, 4, 5, 6, 7, 8}}); }
const CostSpec kCost = CostSpec::identity(8, 1e-6);
const LocalityRule kBenchmarkRule{2, 0, 1};

double lqr_baseline(const LinearSystem& sys, const CostSpec& cost) {
  return lqr_cost(sys, solve_dare(sys, cost).K, cost);
}

}  // namespace

TEST_CASE("ring benchmark costs at T = 15") {
  const LinearSystem sys = ring8();
  const double base = lqr_baseline(sys, kCost);
  const SynthesisResult md = synthesize(make_problem(sys, kCost, kBenchmarkRule, 15, SynthesisMode::mdesign));
  const SynthesisResult sls = synthesize(make_problem(sys, kCost, kBenchmarkRule, 15, SynthesisMode::sls));
  REQUIRE(md.ok());
  REQUIRE(sls.ok());
  CHECK(std::abs(normalized_cost(md, base) - 1.035) <= 0.01);
  CHECK(std::abs(normalized_cost(sls, base) - 1.037) <= 0.01);
  CHECK(sls.objective >= md.objective * (1.0 - 1e-12));
  CHECK(md.feasibility_residual <= 1e-8);
  CHECK(sls.feasibility_residual <= 1e-8);
  CHECK(check_mask(sls.pair, make_problem(sys, kCost, kBenchmarkRule, 15, SynthesisMode::sls).support, 0.0).ok);
  CHECK(md.truncation_tail > 0.0);
  CHECK(md.truncation_tail < 1e-2);
}

TEST_CASE("SLS support lies inside the requested 2-hop masks") {
  const LinearSystem sys = ring8();
  const SynthesisProblem p = make_problem(sys, kCost, {2, 0, 0}, 10, SynthesisMode::sls);
  const SynthesisResult r = synthesize(p);
  REQUIRE(r.ok());
  CHECK(mask_subset(support_of(r.pair), p.support));
  // node 4 drives actuators at nodes 3 and 5 only
  for (int k = 1; k <= 10; ++k) {
    CHECK(r.pair.M(k)(0, 3) == 0.0);
    CHECK(r.pair.M(k)(3, 3) == 0.0);
  }
}

TEST_CASE("fully actuated SLS is near deadbeat") {
  const LinearSystem sys = ring8_full();
  for (int d : {1, 2}) {
    const SynthesisResult r = synthesize(make_problem(sys, kCost, {d, 0, 0}, 6, SynthesisMode::sls));
    REQUIRE(r.ok());
    const double deadbeat = 8.0 + 1e-6 * sys.A().squaredNorm();
    CHECK(r.objective <= deadbeat * (1.0 + 1e-12));
    CHECK(r.objective >= 8.0);
    CHECK((r.pair.R(1) - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r.pair.M(1) + sys.A()).cwiseAbs().maxCoeff() <= 1e-3);
    for (int k = 2; k <= 6; ++k) CHECK(r.pair.R(k).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("unconstrained SLS recovers the LQR cost") {
  const LinearSystem sys = ring8();
  const SynthesisResult r = synthesize(make_unconstrained_problem(sys, kCost, 30, SynthesisMode::sls));
  REQUIRE(r.ok());
  CHECK(normalized_cost(r, lqr_baseline(sys, kCost)) <= 1.005);
  CHECK(normalized_cost(r, lqr_baseline(sys, kCost)) >= 1.0 - 1e-6);
}

TEST_CASE("column problems decouple") {
  // one joint QP over all columns gives the same optimum
  const LinearSystem sys = ring8();
  const SynthesisProblem p = make_problem(sys, kCost, {2, 0, 0}, 4, SynthesisMode::sls);
  const SynthesisResult sep = synthesize(p);
  std::vector<ColumnQp> qps;
  Index nv = 0, nc = 0;
  for (Index j = 0; j < 8; ++j) {
    qps.push_back(build_column_qp(p, j));
    nv += qps.back().H.rows();
    nc += qps.back().C.rows();
  }
  Matrix h = Matrix::Zero(nv, nv), c = Matrix::Zero(nc, nv);
  Vector b = Vector::Zero(nc);
  Index ov = 0, oc = 0;
  for (const ColumnQp& q : qps) {
    h.block(ov, ov, q.H.rows(), q.H.cols()) = q.H;
    c.block(oc, ov, q.C.rows(), q.C.cols()) = q.C;
    b.segment(oc, q.b.size()) = q.b;
    ov += q.H.rows();
    oc += q.C.rows();
  }
  const EqQpResult joint = solve_equality_qp(h, c, b);
  REQUIRE(joint.status == EqQpStatus::solved);
  CHECK(std::abs(joint.objective - sep.objective) <= 1e-9 * sep.objective);
}

TEST_CASE("threaded synthesis is bit-identical to serial") {
  const LinearSystem sys = ring8();
  SynthesisOptions opt;
  const SynthesisResult serial = synthesize(make_problem(sys, kCost, {2, 0, 0}, 8, SynthesisMode::sls, opt));
  opt.threads = 3;
  const SynthesisResult threaded = synthesize(make_problem(sys, kCost, {2, 0, 0}, 8, SynthesisMode::sls, opt));
  for (int k = 1; k <= 8; ++k) {
    CHECK(serial.pair.R(k) == threaded.pair.R(k));
    CHECK(serial.pair.M(k) == threaded.pair.M(k));
  }
  CHECK(serial.objective == threaded.objective);
}

TEST_CASE("objective is nonincreasing as d grows") {
  const LinearSystem sys = ring8();
  for (SynthesisMode mode : {SynthesisMode::sls, SynthesisMode::mdesign}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int d = 1; d <= 4; ++d) {
      const SynthesisResult r = synthesize(make_problem(ring8_full(), kCost, {d, 0, 0}, 8, mode));
      REQUIRE(r.ok());
      CHECK(r.objective <= prev * (1.0 + 1e-10));
      prev = r.objective;
    }
    prev = std::numeric_limits<double>::infinity();
    for (int d = 2; d <= 4; ++d) {
      const SynthesisResult r = synthesize(make_problem(sys, kCost, {d, 0, 0}, 8, mode));
      REQUIRE(r.ok());
      CHECK(r.objective <= prev * (1.0 + 1e-10));
      prev = r.objective;
    }
  }
}

TEST_CASE("with FIR closure the objective is nonincreasing in T") {
  const LinearSystem sys = ring8_full();
  SynthesisOptions opt;
  opt.fir_closure = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int T = 1; T <= 6; ++T) {
    const SynthesisResult r = synthesize(make_problem(sys, kCost, {1, 0, 0}, T, SynthesisMode::sls, opt));
    REQUIRE(r.ok());
    CHECK(r.objective <= prev * (1.0 + 1e-10));
    CHECK(r.truncation_tail <= 1e-8);
    CHECK(feasibility_residual(r.pair, sys, true) <= 1e-8);
    prev = r.objective;
  }
}

TEST_CASE("random plants produce feasible, mask-exact results") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 5 + trial;
    const Mask adj = gen::random_connected(rng, n, 2);
    const LinearSystem sys(Topology(adj), gen::random_dynamics(rng, adj, 1.2), gen::all_nodes(n));
    const CostSpec cost = CostSpec::identity(n, 1e-4);
    const SynthesisMode mode = trial % 2 ? SynthesisMode::mdesign : SynthesisMode::sls;
    const SynthesisProblem p = make_problem(sys, cost, {1 + trial % 2, 0, 0}, 6, mode);
    const SynthesisResult r = synthesize(p);
    REQUIRE(r.ok());
    CHECK(r.feasibility_residual <= 1e-8);
    CHECK(check_mask(r.pair, p.support, 0.0).ok);
    CHECK(r.stats.max_constraint_residual <= 1e-8);
    CHECK(r.stats.total_variables == p.support.allowed_count());
  }
}

TEST_CASE("d = 0 on the benchmark is infeasible in every column") {
  const SynthesisResult r = synthesize(make_problem(ring8(), kCost, {0, 0, 0}, 5, SynthesisMode::sls));
  CHECK_FALSE(r.ok());
  CHECK(r.infeasible_columns().size() == 8);
  for (const ColumnStatus& c : r.columns) {
    CHECK(c.status == EqQpStatus::infeasible);
    CHECK(c.residual > 1e-7);
  }
}

TEST_CASE("zero cost weights are degenerate") {
  const SynthesisResult r =
      synthesize(make_unconstrained_problem(ring8(), CostSpec(Matrix::Zero(8, 8), 0.0), 4, SynthesisMode::sls));
  CHECK_FALSE(r.ok());
  CHECK(r.columns[0].status == EqQpStatus::degenerate);
}

TEST_CASE("malformed problems are rejected up front") {
  const LinearSystem sys = ring8();
  SynthesisProblem p = make_problem(sys, kCost, {2, 0, 0}, 4, SynthesisMode::sls);
  p.mode = SynthesisMode::mdesign;
  CHECK_THROWS_AS(synthesize(p), InvalidArgument);
  SynthesisProblem q = make_problem(sys, CostSpec::identity(7, 1e-6), {2, 0, 0}, 4, SynthesisMode::sls);
  CHECK_THROWS_AS(synthesize(q), InvalidArgument);
}

TEST_CASE("feasibility residual of hand-built pairs") {
  const LinearSystem sys = ring8_full();
  FIRPair p(8, 8, 3, Causality::strictly_causal);
  p.R_mut(1) = Matrix::Identity(8, 8);
  p.M_mut(1) = -sys.A();
  CHECK(feasibility_residual(p, sys, true) <= 1e-15);
  const double eta = 1e-3;
  p.R_mut(2)(2, 5) = eta;
  CHECK(feasibility_residual(p, sys) >= eta - 1e-12);
}

TEST_CASE("normalized cost") {
  CHECK(normalized_cost(4.2, 4.2) == 1.0);
  CHECK_THROWS_AS(normalized_cost(1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(normalized_cost(1.0, -2.0), InvalidArgument);
}

TEST_CASE("static gain fit separates LQR from localized pairs") {
  const LinearSystem sys = ring8();
  const ClosedLoopFir cl = closed_loop_fir(sys, solve_dare(sys, kCost).K, 20);
  CHECK(to_static_gain_check(cl.pair).relative_residual <= 1e-8);

  const SynthesisResult r = synthesize(make_problem(sys, kCost, {2, 0, 0}, 10, SynthesisMode::sls));
  CHECK(to_static_gain_check(r).relative_residual > 1e-3);

  const StaticGainFit zero = to_static_gain_check(FIRPair(8, 4, 3, Causality::strictly_causal));
  CHECK(zero.residual == 0.0);
  CHECK(zero.K.isZero(0.0));
}
