#include <catch2/catch_amalgamated.hpp>

#include "funvar/state_space.hpp"
#include "support/kalman_oracle.hpp"

using namespace funvar;

namespace {

VarParams random_stable_params(Rng& rng, int n_y, int K, int p) {
  const int m = n_y + K;
  VarParams v;
  v.n_y = n_y;
  v.K = K;
  v.p = p;
  v.Phi0 = 0.1 * rng.normal_vector(m);
  for (int j = 0; j < p; ++j) v.Phi.push_back(0.3 / (j + 1) * rng.normal_matrix(m, m) / std::sqrt(m));
  while (companion_spectral_radius(v.Phi) > 0.95)
    for (auto& f : v.Phi) f *= 0.9;
  MatrixXd a = rng.normal_matrix(m, m);
  v.Sigma = a * a.transpose() / m + 0.4 * MatrixXd::Identity(m, m);
  return v;
}

StateSpaceData make_ss_data(Rng& rng, const VarParams& v, int T, Eigen::Index ngrid, int m_ratio) {
  StateSpaceData d;
  d.y = rng.normal_matrix(T, v.n_y);
  d.H = rng.normal_matrix(ngrid, v.K);
  // orthonormalize loadings like the factor step produces
  d.H = Eigen::HouseholderQR<MatrixXd>(d.H).householderQ() * MatrixXd::Identity(ngrid, v.K);
  d.freq_ratio = m_ratio;
  d.obs_periods = build_selector(T, m_ratio);
  d.l_obs = rng.normal_matrix(ngrid, static_cast<Eigen::Index>(d.obs_periods.size()));
  d.presample = StateSpaceData::default_presample(d.y, v.K, v.p);
  return d;
}

}  // namespace

TEST_CASE("selector marks every m-th period and drops the remainder", "[state_space]") {
  REQUIRE(build_selector(5, 1) == std::vector<int>({1, 2, 3, 4, 5}));
  REQUIRE(build_selector(8, 4) == std::vector<int>({4, 8}));
  REQUIRE(build_selector(10, 4) == std::vector<int>({4, 8}));
  CHECK_THROWS_AS(build_selector(10, 0), std::invalid_argument);
}

TEST_CASE("var params validation", "[state_space]") {
  Rng rng(5);
  auto v = random_stable_params(rng, 1, 2, 1);
  v.validate();
  auto bad = v;
  bad.Sigma(0, 1) += 1.0;  // asymmetric
  CHECK_THROWS_AS(bad.validate(), NumericalError);
  auto bad2 = v;
  bad2.Sigma = -MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(bad2.validate(), NumericalError);
  auto bad3 = v;
  bad3.Phi0 = VectorXd::Zero(5);
  CHECK_THROWS_AS(bad3.validate(), ValidationError);
}

TEST_CASE("noiseless observation limit pins the draw to the data", "[state_space]") {
  Rng rng(81);
  // n_y = 0, H = I: the factors are observed directly
  VarParams v;
  v.n_y = 0;
  v.K = 3;
  v.p = 1;
  v.Phi0 = VectorXd::Zero(3);
  v.Phi = {0.5 * MatrixXd::Identity(3, 3)};
  v.Sigma = MatrixXd::Identity(3, 3);

  StateSpaceData d;
  const int T = 12;
  d.y = MatrixXd::Zero(T, 0);
  d.H = MatrixXd::Identity(3, 3);
  d.obs_periods = build_selector(T, 1);
  d.l_obs = rng.normal_matrix(3, T);
  d.presample = MatrixXd::Zero(3, 1);

  auto path = draw_latent_states(v, d, 1e-12, rng);
  for (int t = 0; t < T; ++t)
    REQUIRE((path.row(t).transpose() - d.l_obs.col(t)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("latent conditional matches the Kalman smoother oracle", "[state_space]") {
  Rng rng(2024);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n_y = static_cast<int>(rng.raw() % 3);       // 0..2
    const int K = 1 + static_cast<int>(rng.raw() % 3);     // 1..3
    const int p = 1 + static_cast<int>(rng.raw() % 2);     // 1..2
    const int T = 6 + static_cast<int>(rng.raw() % 5);     // 6..10
    const int m_ratio = (rep % 2 == 0) ? 1 : 4;
    const Eigen::Index ngrid = 6;
    const double sigma2 = 0.2 + rng.uniform();

    auto v = random_stable_params(rng, n_y, K, p);
    auto d = make_ss_data(rng, v, T, ngrid, m_ratio);

    LatentStateSampler sampler(d, p);
    sampler.set_params(v, sigma2);
    VectorXd mean = sampler.mean();
    MatrixXd cov = sampler.covariance();

    auto oracle = testing::kalman_smoother_oracle(v, d, sigma2);
    for (int t = 0; t < T; ++t) {
      VectorXd mu_t = mean.segment(static_cast<Eigen::Index>(t) * K, K);
      REQUIRE((mu_t - oracle.factor_mean.row(t).transpose()).cwiseAbs().maxCoeff() < 1e-8);
      MatrixXd cov_t = cov.block(static_cast<Eigen::Index>(t) * K,
                                 static_cast<Eigen::Index>(t) * K, K, K);
      REQUIRE((cov_t - oracle.factor_cov[t]).cwiseAbs().maxCoeff() < 1e-8);
    }
    ++checked;
  }
  REQUIRE(checked == 50);
}

TEST_CASE("mixed frequency with tiny noise pins observed periods only", "[state_space]") {
  Rng rng(31);
  VarParams v;
  v.n_y = 0;
  v.K = 2;
  v.p = 1;
  v.Phi0 = VectorXd::Zero(2);
  v.Phi = {0.6 * MatrixXd::Identity(2, 2)};
  v.Sigma = 0.5 * MatrixXd::Identity(2, 2);

  StateSpaceData d;
  const int T = 8;
  d.y = MatrixXd::Zero(T, 0);
  d.H = MatrixXd::Identity(2, 2);
  d.freq_ratio = 4;
  d.obs_periods = build_selector(T, 4);  // {4, 8}
  d.l_obs = rng.normal_matrix(2, 2);
  d.presample = MatrixXd::Zero(2, 1);

  const double sigma2 = 1e-10;
  LatentStateSampler sampler(d, 1);
  sampler.set_params(v, sigma2);
  VectorXd mean = sampler.mean();
  REQUIRE((mean.segment(3 * 2, 2) - d.l_obs.col(0)).cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE((mean.segment(7 * 2, 2) - d.l_obs.col(1)).cwiseAbs().maxCoeff() < 1e-6);

  // interior states still agree with the smoother
  auto oracle = testing::kalman_smoother_oracle(v, d, sigma2);
  for (int t = 0; t < T; ++t)
    REQUIRE((mean.segment(static_cast<Eigen::Index>(t) * 2, 2) -
             oracle.factor_mean.row(t).transpose())
                .cwiseAbs()
                .maxCoeff() < 1e-6);
}

TEST_CASE("draws have the conditional mean and covariance", "[state_space]") {
  Rng rng(77);
  auto v = random_stable_params(rng, 1, 2, 1);
  auto d = make_ss_data(rng, v, 6, 5, 1);
  LatentStateSampler sampler(d, 1);
  sampler.set_params(v, 0.5);
  const VectorXd mean = sampler.mean();
  const MatrixXd cov = sampler.covariance();

  const int n_draws = 20000;
  MatrixXd draws(n_draws, mean.size());
  for (int i = 0; i < n_draws; ++i) {
    MatrixXd path = sampler.draw(rng);
    MatrixXd pt = path.transpose();
    draws.row(i) = Eigen::Map<VectorXd>(pt.data(), mean.size()).transpose();
  }
  VectorXd emp_mean = draws.colwise().mean().transpose();
  REQUIRE((emp_mean - mean).cwiseAbs().maxCoeff() < 0.05);
  MatrixXd centered = draws.rowwise() - emp_mean.transpose();
  MatrixXd emp_cov = centered.transpose() * centered / (n_draws - 1);
  REQUIRE((emp_cov - cov).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("pattern validation for mixed frequency", "[state_space]") {
  Rng rng(3);
  auto v = random_stable_params(rng, 1, 2, 1);
  auto d = make_ss_data(rng, v, 8, 5, 4);
  d.obs_periods = {3, 8};  // not the {4, 8} pattern
  CHECK_THROWS_AS(LatentStateSampler(d, 1), ValidationError);
}
