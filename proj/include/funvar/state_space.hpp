#pragma once

// Factor-augmented VAR state space: parameter/data containers, the mixed
// frequency observation selector, and the precision-based joint draw of the
// latent factor path.
//
// The full path b = (beta_1', ..., beta_T')' is drawn in one shot from
//   N( Kbar^{-1} ((1/sigma^2) M'l + G'(I_T (x) Sigma)^{-1}(c_Phi - G_o y)),
//      Kbar^{-1} )
// with Kbar = (1/sigma^2) M'M + G'(I_T (x) Sigma)^{-1} G, M = Q (x) H,
// G = D_Phi S and G_o = D_Phi S_o. Kbar is banded with bandwidth at most
// (p+1)(n_y+K), so a sparse Cholesky in natural ordering stays banded.

#include "funvar/core.hpp"

#include <Eigen/Sparse>

namespace funvar {

struct VarParams {
  int n_y = 0;
  int K = 0;
  int p = 1;
  VectorXd Phi0;               // (n_y+K)
  std::vector<MatrixXd> Phi;   // p matrices, (n_y+K) x (n_y+K)
  MatrixXd Sigma;              // innovation covariance

  int dim() const { return n_y + K; }

  void validate() const {
    std::vector<std::string> bad;
    const int m = dim();
    if (n_y < 0 || K < 1) bad.push_back("need K >= 1 and n_y >= 0");
    if (p < 1) bad.push_back("lag order must be >= 1");
    if (Phi0.size() != m) bad.push_back("Phi0 size mismatch");
    if (static_cast<int>(Phi.size()) != p) bad.push_back("lag matrix count mismatch");
    for (const auto& f : Phi)
      if (f.rows() != m || f.cols() != m) bad.push_back("lag matrix shape mismatch");
    if (Sigma.rows() != m || Sigma.cols() != m) bad.push_back("Sigma shape mismatch");
    if (!bad.empty()) throw ValidationError(bad);
    if (!is_symmetric(Sigma, 1e-10)) throw NumericalError("Sigma is not symmetric");
    if (!is_positive_definite(Sigma)) throw NumericalError("Sigma is not positive definite");
  }

  double spectral_radius() const { return companion_spectral_radius(Phi); }
};

// Observed periods under frequency ratio m: {m, 2m, ...} (1-based). A
// trailing remainder when m does not divide T is treated as unobserved.
inline std::vector<int> build_selector(int T, int m) {
  if (m < 1) throw std::invalid_argument("frequency ratio must be >= 1");
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  std::vector<int> obs;
  for (int t = m; t <= T; t += m) obs.push_back(t);
  return obs;
}

struct StateSpaceData {
  MatrixXd y;              // T x n_y
  MatrixXd l_obs;          // N^grid x #observed, column j = observed period obs_periods[j]
  std::vector<int> obs_periods;  // 1-based periods with an observed density
  MatrixXd H;              // N^grid x K loading matrix
  int freq_ratio = 1;      // m; 1 = fully observed
  MatrixXd presample;      // (n_y+K) x p, column j = w_{-j} (w_0 first)

  int T() const { return static_cast<int>(y.rows()); }
  int n_y() const { return static_cast<int>(y.cols()); }
  int K() const { return static_cast<int>(H.cols()); }
  Eigen::Index n_grid() const { return H.rows(); }

  void validate(int p) const {
    std::vector<std::string> bad;
    if (y.rows() < 1) bad.push_back("need at least one period");
    if (static_cast<Eigen::Index>(obs_periods.size()) != l_obs.cols())
      bad.push_back("observed period count does not match l_obs columns");
    if (l_obs.cols() > 0 && l_obs.rows() != H.rows())
      bad.push_back("l_obs rows must match loading rows");
    for (int t : obs_periods)
      if (t < 1 || t > T()) bad.push_back("observed period outside 1..T");
    if (freq_ratio > 1) {
      const auto expect = build_selector(T(), freq_ratio);
      if (obs_periods != expect) bad.push_back("obs pattern must be {m, 2m, ...} when m > 1");
    }
    if (presample.size() && (presample.rows() != n_y() + K() || presample.cols() < p))
      bad.push_back("presample must be (n_y+K) x p");
    if (!bad.empty()) throw ValidationError(bad);
  }

  // paper-gap default: aggregates at their sample mean, factors at zero
  static MatrixXd default_presample(const MatrixXd& y, int K, int p) {
    const int n_y = static_cast<int>(y.cols());
    VectorXd w0 = VectorXd::Zero(n_y + K);
    if (n_y > 0 && y.rows() > 0) w0.head(n_y) = y.colwise().mean().transpose();
    MatrixXd pre(n_y + K, p);
    for (int j = 0; j < p; ++j) pre.col(j) = w0;
    return pre;
  }
};

// Builds and factors the banded precision of the joint factor path. The
// sparsity pattern depends only on (T, p, dims), so one instance is reused
// across Gibbs iterations with analyzePattern run once.
class LatentStateSampler {
 public:
  LatentStateSampler(const StateSpaceData& data, int p) : data_(data), p_(p) {
    data_.validate(p);
    if (data_.presample.size() == 0)
      data_.presample = StateSpaceData::default_presample(data_.y, data_.K(), p);
    T_ = data_.T();
    ny_ = data_.n_y();
    K_ = data_.K();
    m_ = ny_ + K_;
    HtH_ = data_.H.transpose() * data_.H;
    Htl_ = MatrixXd::Zero(K_, static_cast<Eigen::Index>(data_.obs_periods.size()));
    for (Eigen::Index j = 0; j < data_.l_obs.cols(); ++j)
      Htl_.col(j) = data_.H.transpose() * data_.l_obs.col(j);
    observed_.assign(T_ + 1, -1);
    for (std::size_t j = 0; j < data_.obs_periods.size(); ++j)
      observed_[data_.obs_periods[j]] = static_cast<int>(j);
  }

  // Assemble Kbar and the right-hand side for the current (Phi, Sigma, sigma2).
  void set_params(const VarParams& params, double sigma2) {
    params.validate();
    if (params.n_y != ny_ || params.K != K_ || params.p != p_)
      throw ShapeError("params dimensions do not match data");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");

    Eigen::LLT<MatrixXd> llt(params.Sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("Sigma not PD in latent draw");
    MatrixXd Sinv = llt.solve(MatrixXd::Identity(m_, m_));
    Sinv = 0.5 * (Sinv + Sinv.transpose());

    // c_Phi and G_o y enter only through r = c_Phi - G_o y.
    // Block t of G_o y equals S_oo y_t - sum_j Phi_j S_oo y_{t-j}.
    VectorXd r = VectorXd::Zero(static_cast<Eigen::Index>(T_) * m_);
    for (int t = 1; t <= T_; ++t) {
      VectorXd blk = params.Phi0;
      for (int j = 1; j <= p_; ++j) {
        const int s = t - j;
        if (s >= 1) {
          if (ny_ > 0) blk += params.Phi[j - 1].leftCols(ny_) * data_.y.row(s - 1).transpose();
        } else {
          blk += params.Phi[j - 1] * data_.presample.col(-s);  // w_0, w_{-1}, ...
        }
      }
      if (ny_ > 0) blk.head(ny_) -= data_.y.row(t - 1).transpose();
      r.segment(static_cast<Eigen::Index>(t - 1) * m_, m_) = blk;
    }

    // G block (t, s) = (t==s ? I : -Phi_{t-s}) restricted to factor columns.
    // Kbar(ts, ss) = sum_t G(t,ts)' Sinv G(t,ss), banded in |ts - ss| <= p.
    std::vector<MatrixXd> gcol(p_ + 1);  // G block for lag offset 0..p
    gcol[0] = MatrixXd::Identity(m_, m_).rightCols(K_);
    for (int j = 1; j <= p_; ++j) gcol[j] = -params.Phi[j - 1].rightCols(K_);

    // cross products gcol[a]' Sinv gcol[b] are period-independent
    std::vector<std::vector<MatrixXd>> cross(p_ + 1, std::vector<MatrixXd>(p_ + 1));
    for (int a = 0; a <= p_; ++a) {
      const MatrixXd sa = Sinv * gcol[a];
      for (int b = 0; b <= p_; ++b) cross[b][a] = gcol[b].transpose() * sa;
    }
    // q_t = Sinv r_t
    MatrixXd q(m_, T_);
    for (int t = 0; t < T_; ++t)
      q.col(t) = Sinv * r.segment(static_cast<Eigen::Index>(t) * m_, m_);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(T_) * (2 * p_ + 1) * K_ * K_);
    VectorXd rhs = VectorXd::Zero(static_cast<Eigen::Index>(T_) * K_);

    for (int ts = 1; ts <= T_; ++ts) {
      for (int ss = ts; ss <= std::min(T_, ts + p_); ++ss) {
        MatrixXd blk = MatrixXd::Zero(K_, K_);
        for (int t = ss; t <= std::min(T_, ts + p_); ++t) blk += cross[t - ts][t - ss];
        if (ts == ss && observed_[ts] >= 0) blk += HtH_ / sigma2;
        // insert the full band so the sparsity pattern is call-invariant
        for (int i = 0; i < K_; ++i)
          for (int j = 0; j < K_; ++j) {
            trips.emplace_back((ts - 1) * K_ + i, (ss - 1) * K_ + j, blk(i, j));
            if (ss != ts) trips.emplace_back((ss - 1) * K_ + j, (ts - 1) * K_ + i, blk(i, j));
          }
      }
      VectorXd rb = VectorXd::Zero(K_);
      for (int t = ts; t <= std::min(T_, ts + p_); ++t)
        rb += gcol[t - ts].transpose() * q.col(t - 1);
      if (observed_[ts] >= 0) rb += Htl_.col(observed_[ts]) / sigma2;
      rhs.segment(static_cast<Eigen::Index>(ts - 1) * K_, K_) = rb;
    }

    Eigen::SparseMatrix<double> Kbar(static_cast<Eigen::Index>(T_) * K_,
                                     static_cast<Eigen::Index>(T_) * K_);
    Kbar.setFromTriplets(trips.begin(), trips.end());
    if (!pattern_ready_) {
      solver_.analyzePattern(Kbar);
      pattern_ready_ = true;
    }
    solver_.factorize(Kbar);
    if (solver_.info() != Eigen::Success)
      throw NumericalError("latent-state precision is not positive definite");
    rhs_ = rhs;
  }

  VectorXd mean() const { return solver_.solve(rhs_); }

  // Dense covariance (test/diagnostic use; O((TK)^3)).
  MatrixXd covariance() const {
    const Eigen::Index n = rhs_.size();
    return solver_.solve(MatrixXd::Identity(n, n));
  }

  // One exact draw; returns the factor path as a T x K matrix.
  MatrixXd draw(Rng& rng) const {
    const Eigen::Index n = rhs_.size();
    VectorXd z = rng.normal_vector(n);
    // Kbar = L L' in natural ordering: mean + L^{-T} z has covariance Kbar^{-1}
    VectorXd b = solver_.matrixU().solve(z);
    if (solver_.permutationPinv().size() > 0) b = solver_.permutationPinv() * b;
    b += mean();
    MatrixXd path(T_, K_);
    for (int t = 0; t < T_; ++t)
      path.row(t) = b.segment(static_cast<Eigen::Index>(t) * K_, K_).transpose();
    return path;
  }

  const StateSpaceData& data() const { return data_; }

 private:
  StateSpaceData data_;
  int p_ = 1, T_ = 0, ny_ = 0, K_ = 0, m_ = 0;
  MatrixXd HtH_, Htl_;
  std::vector<int> observed_;
  VectorXd rhs_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                       Eigen::NaturalOrdering<int>>
      solver_;
  bool pattern_ready_ = false;
};

inline MatrixXd draw_latent_states(const VarParams& params, const StateSpaceData& data,
                                   double sigma2, Rng& rng) {
  LatentStateSampler sampler(data, params.p);
  sampler.set_params(params, sigma2);
  return sampler.draw(rng);
}

}  // namespace funvar
