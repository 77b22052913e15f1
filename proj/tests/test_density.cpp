#include <catch2/catch_amalgamated.hpp>

#include "funvar/density.hpp"

using namespace funvar;

namespace {

GridSpec square_grid(int n, double lo, double hi) {
  return GridSpec::make({n, n}, {{lo, hi}, {lo, hi}});
}

DensityField gaussian_field(const GridSpec& g, double sd = 1.0) {
  VectorXd v(g.n_nodes());
  for (Eigen::Index i = 0; i < g.n_nodes(); ++i) {
    const auto x = g.node(i);
    v(i) = std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]) / (sd * sd));
  }
  return DensityField::normalized(g, v);
}

}  // namespace

TEST_CASE("grid indexing round trip and cell volume", "[density]") {
  auto g = GridSpec::make({3, 4}, {{0.0, 1.0}, {-1.0, 1.0}});
  REQUIRE(g.n_nodes() == 12);
  REQUIRE(g.cell_volume() == Catch::Approx(0.5 * (2.0 / 3.0)));
  for (Eigen::Index i = 0; i < g.n_nodes(); ++i) REQUIRE(g.ravel(g.unravel(i)) == i);
  // first dimension fastest
  REQUIRE(g.unravel(1)[0] == 1);
  REQUIRE(g.unravel(1)[1] == 0);
  REQUIRE(g.unravel(3)[0] == 0);
  REQUIRE(g.unravel(3)[1] == 1);
}

TEST_CASE("grid validation", "[density]") {
  CHECK_THROWS_AS(GridSpec::make({1, 3}, {{0, 1}, {0, 1}}), ValidationError);
  CHECK_THROWS_AS(GridSpec::make({3, 3}, {{1, 0}, {0, 1}}), ValidationError);
}

TEST_CASE("kde matches the analytic bivariate normal at the origin", "[density]") {
  Rng rng(20240501);
  const Eigen::Index n = 10000;
  MatrixXd sample(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    sample(i, 0) = rng.normal();
    sample(i, 1) = rng.normal();
  }
  auto g = square_grid(50, -4.0, 4.0);
  auto f = estimate_density(sample, g, silverman_bandwidths(sample));

  // node closest to the origin
  Eigen::Index best = 0;
  double bestd = 1e300;
  for (Eigen::Index i = 0; i < g.n_nodes(); ++i) {
    const auto x = g.node(i);
    const double d = x[0] * x[0] + x[1] * x[1];
    if (d < bestd) {
      bestd = d;
      best = i;
    }
  }
  const double target = 1.0 / (2.0 * M_PI);
  REQUIRE(std::abs(f.values(best) - target) < 0.02);
  REQUIRE(f.riemann_mass() == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("kde error paths", "[density]") {
  auto g = square_grid(8, -1.0, 1.0);
  MatrixXd one(1, 2);
  one.setZero();
  CHECK_THROWS_AS(estimate_density(one, g, VectorXd::Ones(2)), DegenerateSampleError);

  MatrixXd same(5, 2);
  same.setConstant(0.3);
  CHECK_THROWS_AS(silverman_bandwidths(same), DegenerateSampleError);

  MatrixXd ok(5, 2);
  ok.setRandom();
  VectorXd bad(2);
  bad << 0.1, 0.0;
  CHECK_THROWS_AS(estimate_density(ok, g, bad), InvalidBandwidthError);

  MatrixXd nf = ok;
  nf(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(estimate_density(nf, g, VectorXd::Ones(2)), std::invalid_argument);
}

TEST_CASE("kde is invariant to row permutation", "[density]") {
  Rng rng(7);
  MatrixXd sample(200, 2);
  for (Eigen::Index i = 0; i < sample.size(); ++i) sample(i) = rng.normal();
  auto g = square_grid(12, -3.0, 3.0);
  auto h = silverman_bandwidths(sample);
  auto f1 = estimate_density(sample, g, h);
  MatrixXd perm = sample.colwise().reverse();
  auto f2 = estimate_density(perm, g, h);
  REQUIRE((f1.values - f2.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("doubling bandwidths moves the estimate toward uniform", "[density]") {
  Rng rng(99);
  MatrixXd sample(400, 2);
  for (Eigen::Index i = 0; i < sample.size(); ++i) sample(i) = 0.7 * rng.normal();
  auto g = square_grid(16, -3.0, 3.0);
  VectorXd h = silverman_bandwidths(sample);
  auto f1 = estimate_density(sample, g, h);
  auto f2 = estimate_density(sample, g, VectorXd(2.0 * h));
  const double unif = 1.0 / (g.n_nodes() * g.cell_volume());
  const double d1 = (f1.values.array() - unif).abs().maxCoeff();
  const double d2 = (f2.values.array() - unif).abs().maxCoeff();
  REQUIRE(d2 < d1);
}

TEST_CASE("clr of the uniform density is zero and grid mean vanishes", "[density]") {
  auto g = square_grid(10, -1.0, 1.0);
  auto u = DensityField::normalized(g, VectorXd::Ones(g.n_nodes()));
  auto l = clr(u);
  REQUIRE(l.values.cwiseAbs().maxCoeff() < 1e-14);

  auto f = gaussian_field(g, 0.8);
  auto lf = clr(f);
  REQUIRE(std::abs(lf.values.mean()) < 1e-12);
}

TEST_CASE("clr of a bivariate normal equals the centered negative quadratic", "[density]") {
  auto g = square_grid(20, -2.0, 2.0);
  auto f = gaussian_field(g, 1.0);
  auto l = clr(f);
  VectorXd q(g.n_nodes());
  for (Eigen::Index i = 0; i < g.n_nodes(); ++i) {
    const auto x = g.node(i);
    q(i) = -0.5 * (x[0] * x[0] + x[1] * x[1]);
  }
  q.array() -= q.mean();
  REQUIRE((l.values - q).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("clr and inverse_clr are mutual inverses", "[density]") {
  auto g = square_grid(14, -2.0, 2.0);
  Rng rng(4242);
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd raw(g.n_nodes());
    for (Eigen::Index i = 0; i < g.n_nodes(); ++i) raw(i) = std::exp(0.8 * rng.normal());
    auto f = DensityField::normalized(g, raw);
    auto back = inverse_clr(clr(f));
    REQUIRE((back.values - f.values).cwiseAbs().maxCoeff() < 1e-10);

    VectorXd lv(g.n_nodes());
    for (Eigen::Index i = 0; i < g.n_nodes(); ++i) lv(i) = rng.normal();
    lv.array() -= lv.mean();
    ClrField l{g, lv};
    auto l2 = clr(inverse_clr(l));
    REQUIRE((l2.values - l.values).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("inverse_clr of zero field is uniform", "[density]") {
  auto g = square_grid(9, 0.0, 1.0);
  ClrField l{g, VectorXd::Zero(g.n_nodes())};
  auto f = inverse_clr(l);
  const double unif = 1.0 / (g.n_nodes() * g.cell_volume());
  REQUIRE((f.values.array() - unif).abs().maxCoeff() < 1e-14);
}

TEST_CASE("inverse_clr clips extreme values instead of overflowing", "[density]") {
  auto g = square_grid(4, 0.0, 1.0);
  VectorXd lv = VectorXd::Zero(g.n_nodes());
  lv(0) = 5000.0;
  lv(1) = -5000.0;
  auto f = inverse_clr(ClrField{g, lv});
  REQUIRE(f.values.allFinite());
  REQUIRE(f.riemann_mass() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("clr rejects nonpositive densities", "[density]") {
  auto g = square_grid(4, 0.0, 1.0);
  DensityField f{g, VectorXd::Ones(g.n_nodes())};
  f.values(3) = 0.0;
  CHECK_THROWS_AS(clr(f), std::domain_error);
}

TEST_CASE("build_tensor stacks slices in order", "[density]") {
  auto g = GridSpec::make({2, 2}, {{0, 1}, {0, 1}});
  VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  a.array() -= a.mean();
  b.array() -= b.mean();
  auto t = build_tensor({ClrField{g, a}, ClrField{g, b}});
  REQUIRE(t.T == 2);
  REQUIRE(t.data.col(0).isApprox(a));
  REQUIRE(t.data.col(1).isApprox(b));

  auto t1 = build_tensor({ClrField{g, a}});
  REQUIRE(t1.T == 1);
  REQUIRE(t1.data.col(0).isApprox(a));

  auto g2 = GridSpec::make({2, 3}, {{0, 1}, {0, 1}});
  CHECK_THROWS_AS(build_tensor({ClrField{g, a}, ClrField{g2, VectorXd::Zero(6)}}), ShapeError);
}
