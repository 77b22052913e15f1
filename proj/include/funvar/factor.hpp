#pragma once

// Factorization of the CLR tensor: PCA on the time unfolding, multilinear
// (Tucker) PCA by alternating per-mode eigenproblems, and CP by alternating
// least squares. Every method materializes the flat N^grid x K loading
// matrix used by the state space.

#include "funvar/grid.hpp"
#include "funvar/tensor.hpp"

#include <limits>

namespace funvar {

enum class FactorKind { Flat, Tucker, CP };

inline const char* to_string(FactorKind k) {
  switch (k) {
    case FactorKind::Flat: return "flat";
    case FactorKind::Tucker: return "tucker";
    case FactorKind::CP: return "cp";
  }
  return "?";
}

struct LoadingSet {
  FactorKind kind = FactorKind::Flat;
  MatrixXd flat_H;                      // N^grid x K, always materialized
  std::vector<MatrixXd> mode_loadings;  // per-mode N_i x K_i (Tucker / CP)
  std::vector<int> ranks;               // {K} or {K_1,...,K_Nc}
  double explained_variance = 0.0;
  VectorXd mean_field;  // time-mean CLR field subtracted before factorization
                        // (empty means zero)

  Eigen::Index K() const { return flat_H.cols(); }

  VectorXd mean_or_zero() const {
    return mean_field.size() ? mean_field : VectorXd::Zero(flat_H.rows());
  }
};

struct ScorePath {
  MatrixXd scores;  // T x K, row t = beta_t
  Eigen::Index T() const { return scores.rows(); }
  Eigen::Index K() const { return scores.cols(); }
};

struct TensorFactorization {
  LoadingSet loadings;
  ScorePath scores;
  // one objective sequence per restart (explained-variance scale);
  // alternating steps must be monotone non-decreasing
  std::vector<std::vector<double>> objective_paths;
  int best_restart = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void sign_fix_columns(MatrixXd& m, VectorXd* flips = nullptr) {
  if (flips) flips->setOnes(m.cols());
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    Eigen::Index imax = 0;
    m.col(k).cwiseAbs().maxCoeff(&imax);
    if (m(imax, k) < 0.0) {
      m.col(k) = -m.col(k);
      if (flips) (*flips)(k) = -1.0;
    }
  }
}

inline MatrixXd random_orthonormal(Rng& rng, Eigen::Index n, Eigen::Index k) {
  MatrixXd z = rng.normal_matrix(n, k);
  Eigen::HouseholderQR<MatrixXd> qr(z);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, k);
  return q;
}

inline Tensor to_tensor(const ClrTensor& t) {
  Tensor x;
  x.dims = t.dim_sizes();
  x.data = Eigen::Map<const VectorXd>(t.data.data(), t.data.size());
  return x;
}

// Kronecker product of mode loadings in reverse mode order, so that
// vec(core x_1 H_1 ... x_C H_C) = (H_C (x) ... (x) H_1) vec(core).
inline MatrixXd kron_reversed(const std::vector<MatrixXd>& hs) {
  MatrixXd acc = hs.back();
  for (Eigen::Index d = static_cast<Eigen::Index>(hs.size()) - 2; d >= 0; --d)
    acc = kron(acc, hs[d]);
  return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PCA on the time unfolding

// L_tilde is the N^grid x T matrix with column t = vec of the CLR field.
inline TensorFactorization pca_unfolded(const MatrixXd& L_tilde, int K) {
  const Eigen::Index n = L_tilde.rows(), T = L_tilde.cols();
  if (K < 1 || K > std::min(n, T)) throw RankError("pca_unfolded: rank out of range");

  Eigen::BDCSVD<MatrixXd> svd(L_tilde, Eigen::ComputeThinU);
  const VectorXd sv = svd.singularValues();
  MatrixXd U = svd.matrixU().leftCols(K);
  detail::sign_fix_columns(U);

  const double total = sv.squaredNorm();
  const double kept = sv.head(K).squaredNorm();

  TensorFactorization out;
  out.loadings.kind = FactorKind::Flat;
  out.loadings.flat_H = U;
  out.loadings.ranks = {K};
  out.loadings.explained_variance = total > 0.0 ? kept / total : 1.0;
  out.scores.scores = L_tilde.transpose() * U;  // beta_t = H' l_t
  return out;
}

// ---------------------------------------------------------------------------
// Multilinear (Tucker) PCA

struct AlternatingOptions {
  int restarts = 10;
  double epsilon = 1e-9;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

// Maximizes T^-1 sum_t ||core_t||^2 over per-mode orthonormal frames by
// alternating eigenproblems; the time mode is never compressed. Keeps the
// best of `restarts` random orthonormal starts (ties to the lowest index).
inline TensorFactorization mlpca(const ClrTensor& tensor, const std::vector<int>& ranks,
                                 const AlternatingOptions& opt = {}) {
  const int C = tensor.grid.dims;
  if (static_cast<int>(ranks.size()) != C)
    throw RankError("mlpca: one rank per spatial mode required");
  for (int d = 0; d < C; ++d)
    if (ranks[d] < 1 || ranks[d] > tensor.grid.points_per_dim[d])
      throw RankError("mlpca: rank out of range for mode " + std::to_string(d + 1));
  if (opt.restarts < 1) throw std::invalid_argument("mlpca: restarts must be >= 1");

  const Tensor x = detail::to_tensor(tensor);
  const double total = x.data.squaredNorm();

  double best_obj = -1.0;
  std::vector<MatrixXd> best_h;
  TensorFactorization out;
  Rng base = Rng::seeded(opt.seed);

  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng = base.spawn(static_cast<std::uint64_t>(r));
    std::vector<MatrixXd> h(C);
    for (int d = 0; d < C; ++d)
      h[d] = detail::random_orthonormal(rng, tensor.grid.points_per_dim[d], ranks[d]);

    std::vector<double> path;
    double obj = -std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < opt.max_iter && !converged; ++it) {
      double sweep_obj = 0.0;
      for (int d = 0; d < C; ++d) {
        Tensor y = x;
        for (int e = 0; e < C; ++e)
          if (e != d) y = mode_n_product(y, h[e].transpose(), e + 1);
        MatrixXd unf = unfold(y, d + 1);             // rest x N_d
        MatrixXd cov = unf.transpose() * unf;        // N_d x N_d
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success) throw NumericalError("mlpca: eigensolver failed", it);
        const Eigen::Index nd = cov.rows();
        h[d] = eig.eigenvectors().rightCols(ranks[d]).rowwise().reverse();
        sweep_obj = eig.eigenvalues().tail(ranks[d]).sum();
        (void)nd;
      }
      path.push_back(sweep_obj / static_cast<double>(tensor.T));
      const double gain = sweep_obj - (std::isfinite(obj) ? obj : 0.0);
      if (std::isfinite(obj) && gain <= opt.epsilon * std::max(1.0, std::abs(sweep_obj)))
        converged = true;
      obj = sweep_obj;
    }
    if (!converged)
      throw ConvergenceError("mlpca: no convergence after max_iter", obj / tensor.T);
    if (obj > best_obj) {
      best_obj = obj;
      best_h = h;
      out.best_restart = r;
    }
    out.objective_paths.push_back(std::move(path));
  }

  for (auto& h : best_h) detail::sign_fix_columns(h);

  // projected core and scores under the sign-fixed frames
  Tensor core = x;
  for (int d = 0; d < C; ++d) core = mode_n_product(core, best_h[d].transpose(), d + 1);
  MatrixXd score_unf = unfold(core, C + 1);  // (prod K) x T, rows = vec(core_t)

  out.loadings.kind = FactorKind::Tucker;
  out.loadings.mode_loadings = best_h;
  out.loadings.ranks = ranks;
  out.loadings.flat_H = detail::kron_reversed(best_h);
  out.loadings.explained_variance = total > 0.0 ? core.data.squaredNorm() / total : 1.0;
  out.scores.scores = score_unf.transpose();
  out.seed = opt.seed;
  return out;
}

// ---------------------------------------------------------------------------
// CP (CANDECOMP/PARAFAC) by alternating least squares

namespace detail {

// Column-wise Khatri-Rao with the FIRST argument's index running fastest,
// matching the canonical row order of the unfoldings.
inline MatrixXd khatri_rao_first_fastest(const std::vector<const MatrixXd*>& mats) {
  MatrixXd acc = *mats.front();
  for (std::size_t i = 1; i < mats.size(); ++i) {
    const MatrixXd& b = *mats[i];  // slower index
    MatrixXd next(acc.rows() * b.rows(), acc.cols());
    for (Eigen::Index k = 0; k < acc.cols(); ++k) {
      for (Eigen::Index jb = 0; jb < b.rows(); ++jb)
        next.col(k).segment(jb * acc.rows(), acc.rows()) = b(jb, k) * acc.col(k);
    }
    acc = std::move(next);
  }
  return acc;
}

}  // namespace detail

// Shared-rank decomposition l_t = sum_k beta_{t,k} (h_k^(C) o ... o h_k^(1));
// spatial mode vectors are unit norm with magnitudes absorbed into the scores.
inline TensorFactorization cp_als(const ClrTensor& tensor, int K,
                                  const AlternatingOptions& opt = {}) {
  if (K < 1) throw RankError("cp_als: rank must be >= 1");
  if (opt.restarts < 1) throw std::invalid_argument("cp_als: restarts must be >= 1");
  const int C = tensor.grid.dims;
  const int M = C + 1;  // spatial modes + time

  const Tensor x = detail::to_tensor(tensor);
  const double total = x.data.squaredNorm();

  std::vector<MatrixXd> unfoldings(M);
  for (int m = 0; m < M; ++m) unfoldings[m] = unfold(x, m + 1);  // rest x d_m

  double best_err = std::numeric_limits<double>::infinity();
  std::vector<MatrixXd> best_a;
  TensorFactorization out;
  Rng base = Rng::seeded(opt.seed);

  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng = base.spawn(0x4350ULL + static_cast<std::uint64_t>(r));
    std::vector<MatrixXd> a(M);
    for (int m = 0; m < M; ++m) {
      const Eigen::Index dm = x.dims[m];
      a[m] = rng.normal_matrix(dm, K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const double nrm = a[m].col(k).norm();
        if (nrm > 0) a[m].col(k) /= nrm;
      }
    }

    std::vector<double> path;
    double err = std::numeric_limits<double>::infinity();
    double prev_fit = -std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < opt.max_iter && !converged; ++it) {
      for (int m = 0; m < M; ++m) {
        std::vector<const MatrixXd*> others;
        for (int e = 0; e < M; ++e)
          if (e != m) others.push_back(&a[e]);
        MatrixXd kr = detail::khatri_rao_first_fastest(others);  // rest x K
        MatrixXd v = MatrixXd::Ones(K, K);
        for (int e = 0; e < M; ++e)
          if (e != m) v = v.cwiseProduct(a[e].transpose() * a[e]);
        MatrixXd rhs = unfoldings[m].transpose() * kr;  // d_m x K
        a[m] = v.completeOrthogonalDecomposition().solve(rhs.transpose()).transpose();
        if (m < C) {
          // unit-norm spatial columns; push magnitude into the time factors
          // so the iterate itself is unchanged and the fit stays monotone
          for (Eigen::Index k = 0; k < K; ++k) {
            const double nrm = a[m].col(k).norm();
            if (nrm > 0) {
              a[m].col(k) /= nrm;
              a[M - 1].col(k) *= nrm;
            }
          }
        }
      }
      // fit after updating the time mode last: err^2 = ||X||^2 - 2<X,Xhat> + ||Xhat||^2
      std::vector<const MatrixXd*> spatial;
      for (int e = 0; e < C; ++e) spatial.push_back(&a[e]);
      MatrixXd kr = detail::khatri_rao_first_fastest(spatial);
      MatrixXd u = unfoldings[M - 1].transpose() * kr;  // T x K
      MatrixXd gram = MatrixXd::Ones(K, K);
      for (int e = 0; e < C; ++e) gram = gram.cwiseProduct(a[e].transpose() * a[e]);
      const double cross = (a[M - 1].cwiseProduct(u)).sum();
      const double hatsq = (a[M - 1].transpose() * a[M - 1]).cwiseProduct(gram).sum();
      const double err2 = std::max(0.0, total - 2.0 * cross + hatsq);
      const double fit = total > 0.0 ? 1.0 - err2 / total : 1.0;
      path.push_back(fit);
      if (std::isfinite(prev_fit) && fit - prev_fit <= opt.epsilon) converged = true;
      prev_fit = fit;
      err = err2;
    }
    if (!converged) {
      const double fit = total > 0.0 ? 1.0 - err / total : 1.0;
      throw ConvergenceError("cp_als: no convergence after max_iter", fit);
    }
    if (err < best_err) {
      best_err = err;
      best_a = a;
      out.best_restart = r;
    }
    out.objective_paths.push_back(std::move(path));
  }

  // sign-fix spatial columns, push the flip product into the scores
  VectorXd score_flip = VectorXd::Ones(K);
  for (int d = 0; d < C; ++d) {
    VectorXd flips;
    detail::sign_fix_columns(best_a[d], &flips);
    score_flip = score_flip.cwiseProduct(flips);
  }
  MatrixXd scores = best_a[M - 1];
  for (Eigen::Index k = 0; k < K; ++k) scores.col(k) *= score_flip(k);

  out.loadings.kind = FactorKind::CP;
  out.loadings.mode_loadings.assign(best_a.begin(), best_a.begin() + C);
  out.loadings.ranks = {K};
  out.loadings.flat_H.resize(x.size() / tensor.T, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    VectorXd col = out.loadings.mode_loadings[0].col(k);
    for (int d = 1; d < C; ++d) {
      const VectorXd& next = out.loadings.mode_loadings[d].col(k);
      VectorXd cur = col;
      col.resize(cur.size() * next.size());
      for (Eigen::Index j = 0; j < next.size(); ++j)
        col.segment(j * cur.size(), cur.size()) = next(j) * cur;
    }
    out.loadings.flat_H.col(k) = col;
  }
  out.loadings.explained_variance = total > 0.0 ? 1.0 - best_err / total : 1.0;
  out.scores.scores = scores;
  out.seed = opt.seed;
  return out;
}

// ---------------------------------------------------------------------------
// Rank selection by explained variance

// Smallest rank whose explained variance reaches the threshold. Tucker
// candidates are scanned in ascending total-size order (lexicographic among
// equal sizes).
inline std::vector<int> select_rank(const ClrTensor& tensor, FactorKind method, double threshold,
                                    const AlternatingOptions& opt = {}) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("select_rank: threshold must lie in (0,1)");
  const Eigen::Index n = tensor.data.rows(), T = tensor.T;

  if (method == FactorKind::Flat) {
    Eigen::BDCSVD<MatrixXd> svd(tensor.data);
    const VectorXd sv = svd.singularValues();
    const double total = sv.squaredNorm();
    if (total <= 0.0) return {1};
    double acc = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      acc += sv(k) * sv(k);
      if (acc / total >= threshold) return {static_cast<int>(k + 1)};
    }
    return {static_cast<int>(sv.size())};
  }

  if (method == FactorKind::CP) {
    const int kmax = static_cast<int>(std::min(n, T));
    for (int k = 1; k <= kmax; ++k) {
      auto fit = cp_als(tensor, k, opt);
      if (fit.loadings.explained_variance >= threshold) return {k};
    }
    return {kmax};
  }

  // Tucker: enumerate rank tuples ordered by total size
  const int C = tensor.grid.dims;
  std::vector<std::vector<int>> candidates;
  std::vector<int> cur(C, 1);
  for (;;) {
    candidates.push_back(cur);
    int d = 0;
    while (d < C) {
      if (cur[d] < tensor.grid.points_per_dim[d]) {
        ++cur[d];
        for (int e = 0; e < d; ++e) cur[e] = 1;
        break;
      }
      ++d;
    }
    if (d == C) break;
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              long pa = 1, pb = 1;
              for (int x : a) pa *= x;
              for (int x : b) pb *= x;
              if (pa != pb) return pa < pb;
              return a < b;
            });
  for (const auto& ranks : candidates) {
    auto fit = mlpca(tensor, ranks, opt);
    if (fit.loadings.explained_variance >= threshold) return ranks;
  }
  return candidates.back();
}

// ---------------------------------------------------------------------------
// Module entry point used by the pipeline: centers the tensor by its
// time-mean field, factorizes the centered data, and stores the mean for
// reconstruction.

struct FactorOptions {
  FactorKind method = FactorKind::Tucker;
  std::vector<int> ranks;      // used when threshold <= 0
  double threshold = 0.0;      // rank selection when in (0,1)
  AlternatingOptions alternating;
};

inline TensorFactorization fit_factor_model(const ClrTensor& tensor, const FactorOptions& opt) {
  ClrTensor centered = tensor;
  VectorXd mean = tensor.data.rowwise().mean();
  centered.data.colwise() -= mean;

  std::vector<int> ranks = opt.ranks;
  if (opt.threshold > 0.0 && opt.threshold < 1.0)
    ranks = select_rank(centered, opt.method, opt.threshold, opt.alternating);

  TensorFactorization fit;
  switch (opt.method) {
    case FactorKind::Flat:
      if (ranks.size() != 1) throw RankError("flat factorization takes a single rank");
      fit = pca_unfolded(centered.data, ranks[0]);
      break;
    case FactorKind::Tucker:
      fit = mlpca(centered, ranks, opt.alternating);
      break;
    case FactorKind::CP:
      if (ranks.size() != 1) throw RankError("cp factorization takes a single rank");
      fit = cp_als(centered, ranks[0], opt.alternating);
      break;
  }
  fit.loadings.mean_field = std::move(mean);
  return fit;
}

// mean + H beta_t, the model-implied CLR field for one period.
inline VectorXd reconstruct_clr(const LoadingSet& loadings, const VectorXd& beta) {
  if (beta.size() != loadings.K()) throw ShapeError("score length does not match loadings");
  return loadings.mean_or_zero() + loadings.flat_H * beta;
}

}  // namespace funvar
