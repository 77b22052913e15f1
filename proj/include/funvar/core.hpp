#pragma once

// Shared error types, RNG, and small numeric helpers used across the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace funvar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RankError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateSampleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidBandwidthError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ValidationError : std::invalid_argument {
  std::vector<std::string> violations;
  explicit ValidationError(std::vector<std::string> v)
      : std::invalid_argument(join(v)), violations(std::move(v)) {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
  }
};

// Iterative scheme failed to plateau; carries the last objective value.
struct ConvergenceError : std::runtime_error {
  double last_objective;
  ConvergenceError(const std::string& msg, double obj)
      : std::runtime_error(msg + " (last objective " + std::to_string(obj) + ")"),
        last_objective(obj) {}
};

// Linear-algebra failure (non-PD matrix, rank deficiency); iteration = -1
// when the failure is not tied to a sampler iteration.
struct NumericalError : std::runtime_error {
  long iteration;
  explicit NumericalError(const std::string& msg, long iter = -1)
      : std::runtime_error(iter >= 0 ? msg + " at iteration " + std::to_string(iter) : msg),
        iteration(iter) {}
};

struct DivergenceError : std::runtime_error {
  long iteration;
  explicit DivergenceError(const std::string& msg, long iter = -1)
      : std::runtime_error(iter >= 0 ? msg + " at iteration " + std::to_string(iter) : msg),
        iteration(iter) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// RNG
//
// All samplers are implemented on top of the raw uniform stream so a seed
// pins the entire draw sequence bit-for-bit.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on (0,1), never returning 0 or 1.
  double uniform() {
    const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return u;
  }

  double normal() {
    // Marsaglia polar method; caches the second variate.
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cache_ = v * f;
    has_cache_ = true;
    return u * f;
  }

  // Gamma(shape, rate) via Marsaglia-Tsang; shape > 0, rate > 0.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw std::invalid_argument("gamma: shape and rate must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double chi2(double dof) { return gamma(0.5 * dof, 0.5); }

  // Inverse gamma with shape/scale parameterization: X = scale / Gamma(shape, 1).
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  // Inverse Gaussian(mean mu, shape lambda), Michael-Schucany-Haas.
  double inv_gaussian(double mu, double lambda) {
    if (!(mu > 0.0) || !(lambda > 0.0))
      throw std::invalid_argument("inv_gaussian: mu and lambda must be positive");
    const double z = normal();
    const double y = z * z;
    const double x = mu + mu * mu * y / (2.0 * lambda) -
                     mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
    const double u = uniform();
    if (u <= mu / (mu + x)) return x;
    return mu * mu / x;
  }

  VectorXd normal_vector(Eigen::Index n) {
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c) {
    MatrixXd z(r, c);
    // column-major fill so the draw order matches Eigen storage
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) z(i, j) = normal();
    return z;
  }

  // Derive an independent stream (for restarts / parallel chains).
  Rng spawn(std::uint64_t stream) const {
    std::uint64_t s = seed_mix_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(s);
  }

  static Rng seeded(std::uint64_t seed) {
    Rng r(seed);
    r.seed_mix_ = seed;
    return r;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_mix_ = 0;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Matrix-variate draws

// Wishart(dof, V) via Bartlett; requires dof >= dim and V symmetric PD.
inline MatrixXd wishart(Rng& rng, double dof, const MatrixXd& V) {
  const Eigen::Index m = V.rows();
  if (dof < static_cast<double>(m))
    throw NumericalError("wishart: dof below dimension");
  Eigen::LLT<MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw NumericalError("wishart: scale not PD");
  MatrixXd A = MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, i) = std::sqrt(rng.chi2(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  MatrixXd L = llt.matrixL();
  MatrixXd LA = L * A;
  return LA * LA.transpose();
}

// Inverse-Wishart(dof, S): Sigma with Sigma^{-1} ~ W(dof, S^{-1}).
inline MatrixXd inv_wishart(Rng& rng, double dof, const MatrixXd& S) {
  const Eigen::Index m = S.rows();
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("inv_wishart: scale not PD");
  // C C' = S^{-1} with C = L^{-T}; W = (C A)(C A)' ~ W(dof, S^{-1}).
  MatrixXd A = MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, i) = std::sqrt(rng.chi2(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  MatrixXd CA = llt.matrixL().transpose().solve(A);
  MatrixXd W = CA * CA.transpose();
  Eigen::LLT<MatrixXd> lltw(W);
  if (lltw.info() != Eigen::Success) throw NumericalError("inv_wishart: draw not PD");
  MatrixXd Sigma = lltw.solve(MatrixXd::Identity(m, m));
  return 0.5 * (Sigma + Sigma.transpose());
}

// ---------------------------------------------------------------------------
// Small helpers

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Linear-interpolated quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile: empty sample");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * x[lo] + w * x[hi];
}

inline bool is_symmetric(const MatrixXd& A, double tol = 1e-10) {
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_positive_definite(const MatrixXd& A) {
  if (A.rows() != A.cols()) return false;
  Eigen::LLT<MatrixXd> llt(A);
  return llt.info() == Eigen::Success;
}

// Spectral radius of the VAR companion matrix built from lag matrices.
inline double companion_spectral_radius(const std::vector<MatrixXd>& phi) {
  if (phi.empty()) return 0.0;
  const Eigen::Index m = phi[0].rows();
  const Eigen::Index p = static_cast<Eigen::Index>(phi.size());
  MatrixXd C = MatrixXd::Zero(m * p, m * p);
  for (Eigen::Index j = 0; j < p; ++j) C.block(0, j * m, m, m) = phi[j];
  if (p > 1) C.block(m, 0, m * (p - 1), m * (p - 1)).setIdentity();
  return C.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace funvar
