#include "generators.hpp"
#include "oracles.hpp"

#include "slsmeso/plant.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace slsmeso;

namespace {

LinearSystem ring8() { return build_ring({8, 1.8, {1, 3, 5, 7}}); }

std::vector<std::vector<bool>> to_nested(const Mask& m) {
  std::vector<std::vector<bool>> out(static_cast<std::size_t>(m.rows()),
                                     std::vector<bool>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

}  // namespace

TEST_CASE("ring benchmark has tridiagonal wraparound A and selector B") {
  const LinearSystem sys = ring8();
  REQUIRE(sys.states() == 8);
  REQUIRE(sys.inputs() == 4);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      const Index d = std::min((i - j + 8) % 8, (j - i + 8) % 8);
      CHECK(sys.A()(i, j) == (d <= 1 ? 1.8 / 3.0 : 0.0));
    }
  const std::vector<Index> nodes{0, 2, 4, 6};
  for (Index c = 0; c < 4; ++c) {
    CHECK(sys.B().col(c).sum() == 1.0);
    CHECK(sys.B()(nodes[static_cast<std::size_t>(c)], c) == 1.0);
    CHECK(sys.actuator_of(nodes[static_cast<std::size_t>(c)]) == c);
  }
  CHECK_FALSE(sys.actuator_of(1).has_value());
}

TEST_CASE("ring spectral radius matches a, checked by power iteration") {
  const LinearSystem sys = ring8();
  CHECK(std::abs(spectral_radius(sys.A()) - 1.8) <= 1e-9);
  CHECK(std::abs(oracle::power_iteration_radius(sys.A()) - 1.8) <= 1e-9);
}

TEST_CASE("three node ring is the all-ones matrix") {
  const LinearSystem sys = build_ring({3, 3.0, {1, 2, 3}});
  CHECK(sys.A() == Matrix::Ones(3, 3));
  CHECK(std::abs(spectral_radius(sys.A()) - 3.0) <= 1e-12);
}

TEST_CASE("random rings are symmetric circulant with radius a") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> nd(3, 20);
  std::uniform_real_distribution<double> ad(0.1, 4.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = nd(rng);
    const double a = ad(rng);
    const LinearSystem sys = build_ring({n, a, {1}});
    CHECK((sys.A() - sys.A().transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) CHECK(sys.A()(i, j) == sys.A()((i + 1) % n, (j + 1) % n));
    CHECK(std::abs(spectral_radius(sys.A()) - a) <= 1e-9 * std::max(1.0, a));
  }
}

TEST_CASE("build_ring rejects bad specs") {
  CHECK_THROWS_AS(build_ring({2, 1.0, {1}}), InvalidArgument);
  CHECK_THROWS_AS(build_ring({8, 0.0, {1}}), InvalidArgument);
  CHECK_THROWS_AS(build_ring({8, 1.8, {0}}), InvalidArgument);
  CHECK_THROWS_AS(build_ring({8, 1.8, {9}}), InvalidArgument);
  CHECK_THROWS_AS(build_ring({8, 1.8, {1, 3, 1}}), InvalidArgument);
}

TEST_CASE("hop distances on the 8-cycle") {
  const Topology ring = Topology::ring(8);
  CHECK(hop_distance(ring, 3, 3) == 0);
  CHECK(hop_distance(ring, 3, 5) == 2);  // nodes 4 and 6
  CHECK(hop_distance(ring, 0, 4) == 4);  // nodes 1 and 5
  CHECK(diameter(ring) == 4);
  const auto ref = oracle::floyd_distances(to_nested(ring.adjacency()));
  const auto d = distance_matrix(ring);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) CHECK(d(i, j) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
}

TEST_CASE("disconnected pairs are unreachable, not a number") {
  std::mt19937_64 rng(3);
  const Topology topo(gen::two_components(rng, 3, 4));
  CHECK_FALSE(hop_distance(topo, 0, 5).has_value());
  CHECK(hop_distance(topo, 4, 5).has_value());
  CHECK(distance_matrix(topo)(0, 5) == -1);
}

TEST_CASE("hop distance is a metric on random connected graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 4 + static_cast<Index>(trial % 12);
    const Mask adj = gen::random_connected(rng, n, static_cast<int>(n / 2));
    const Topology topo(adj);
    const auto d = distance_matrix(topo);
    const auto ref = oracle::floyd_distances(to_nested(adj));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        REQUIRE(d(i, j) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        CHECK(d(i, j) == d(j, i));
        CHECK((d(i, j) == 0) == (i == j));
        for (Index k = 0; k < n; ++k) CHECK(d(i, j) <= d(i, k) + d(k, j));
      }
  }
}

TEST_CASE("validate_system reports sparsity and actuation problems") {
  const LinearSystem good = ring8();
  const ValidationReport ok = validate_system(good);
  CHECK(ok.ok);
  CHECK(std::abs(ok.spectral_radius - 1.8) <= 1e-9);

  Matrix a = good.A();
  a(0, 3) = 0.1;
  const ValidationReport bad_a = validate_system(LinearSystem::raw(good.topology(), a, good.B()));
  CHECK_FALSE(bad_a.ok);
  REQUIRE(bad_a.issues.size() == 1);
  CHECK(bad_a.issues[0].find("sparsity") != std::string::npos);

  Matrix b = good.B();
  b(1, 0) = 1.0;
  const ValidationReport bad_b = validate_system(LinearSystem::raw(good.topology(), good.A(), b));
  CHECK_FALSE(bad_b.ok);
  CHECK(bad_b.issues[0].find("malformed actuation") != std::string::npos);
}

TEST_CASE("unstable component without actuators draws a warning") {
  std::mt19937_64 rng(5);
  const Mask adj = gen::two_components(rng, 3, 3);
  const Matrix a = gen::random_dynamics(rng, adj, 1.5);
  const LinearSystem sys(Topology(adj), a, {0});
  const ValidationReport rep = validate_system(sys);
  CHECK(rep.ok);
  CHECK_FALSE(rep.warnings.empty());
}
