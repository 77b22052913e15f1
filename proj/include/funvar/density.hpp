#pragma once

// Kernel density estimation on the grid and the centered log-ratio transform.

#include "funvar/grid.hpp"

namespace funvar {

// Per-dimension Silverman rule-of-thumb bandwidths for a product Gaussian
// kernel. Throws DegenerateSampleError when a dimension has zero variance.
inline VectorXd silverman_bandwidths(const MatrixXd& sample) {
  const Eigen::Index n = sample.rows();
  const Eigen::Index d = sample.cols();
  if (n < 2) throw DegenerateSampleError("need at least two observations");
  VectorXd h(d);
  const double expo = 1.0 / (static_cast<double>(d) + 4.0);
  const double factor =
      std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(n)), expo);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mu = sample.col(j).mean();
    const double sd =
        std::sqrt((sample.col(j).array() - mu).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0.0))
      throw DegenerateSampleError("zero sample variance: bandwidth rule yields 0");
    h(j) = factor * sd;
  }
  return h;
}

// Product-Gaussian kernel density estimate evaluated at every grid node,
// floored and renormalized so the Riemann sum over the grid equals one.
inline DensityField estimate_density(const MatrixXd& sample, const GridSpec& grid,
                                     const VectorXd& bandwidths) {
  const Eigen::Index n = sample.rows();
  if (n < 2) throw DegenerateSampleError("need at least two observations");
  if (sample.cols() != grid.dims) throw ShapeError("sample column count must match grid dims");
  if (!sample.allFinite()) throw std::invalid_argument("sample contains non-finite entries");
  if (bandwidths.size() != grid.dims) throw InvalidBandwidthError("one bandwidth per dimension");
  if (!((bandwidths.array() > 0.0).all() && bandwidths.allFinite()))
    throw InvalidBandwidthError("bandwidths must be positive and finite");

  const double inv_sqrt2pi = 0.3989422804014326779;

  // Per-dimension kernel matrices K_d(i, obs) = phi((x_i - X_obs)/h_d)/h_d.
  std::vector<MatrixXd> kd(grid.dims);
  for (int d = 0; d < grid.dims; ++d) {
    const int nd = grid.points_per_dim[d];
    const double h = bandwidths(d);
    kd[d].resize(nd, n);
    for (int i = 0; i < nd; ++i) {
      const double x = grid.coordinate(d, i);
      for (Eigen::Index o = 0; o < n; ++o) {
        const double z = (x - sample(o, d)) / h;
        kd[d](i, o) = inv_sqrt2pi * std::exp(-0.5 * z * z) / h;
      }
    }
  }

  VectorXd values;
  if (grid.dims == 1) {
    values = kd[0].rowwise().sum() / static_cast<double>(n);
  } else if (grid.dims == 2) {
    // f(i,j) = (1/n) sum_o K1(i,o) K2(j,o); first dim fastest in the flat layout
    MatrixXd f = kd[0] * kd[1].transpose() / static_cast<double>(n);
    values = Eigen::Map<VectorXd>(f.data(), f.size());
  } else {
    values = VectorXd::Zero(grid.n_nodes());
    const Eigen::Index nn = grid.n_nodes();
    for (Eigen::Index flat = 0; flat < nn; ++flat) {
      const auto idx = grid.unravel(flat);
      double acc = 0.0;
      for (Eigen::Index o = 0; o < n; ++o) {
        double w = 1.0;
        for (int d = 0; d < grid.dims; ++d) w *= kd[d](idx[d], o);
        acc += w;
      }
      values(flat) = acc / static_cast<double>(n);
    }
  }
  return DensityField::normalized(grid, std::move(values));
}

inline DensityField estimate_density(const MatrixXd& sample, const GridSpec& grid) {
  return estimate_density(sample, grid, silverman_bandwidths(sample));
}

// log f minus its grid mean; requires strict positivity.
inline ClrField clr(const DensityField& f) {
  if (!(f.values.array() > 0.0).all())
    throw std::domain_error("clr requires strictly positive density values");
  VectorXd l = f.values.array().log();
  l.array() -= l.mean();
  return ClrField{f.grid, std::move(l)};
}

// exp of the field renormalized to a density; values clipped at +-700 so
// exp cannot overflow, with the renormalization absorbing the clip.
inline DensityField inverse_clr(const ClrField& l) {
  if (!l.values.allFinite()) throw std::invalid_argument("inverse_clr requires finite values");
  VectorXd v = l.values.cwiseMin(700.0).cwiseMax(-700.0).array().exp();
  return DensityField::normalized(l.grid, std::move(v));
}

inline ClrTensor build_tensor(const std::vector<ClrField>& fields) {
  if (fields.empty()) throw ShapeError("build_tensor needs at least one field");
  const GridSpec& g = fields.front().grid;
  ClrTensor t;
  t.grid = g;
  t.T = static_cast<Eigen::Index>(fields.size());
  t.data.resize(g.n_nodes(), t.T);
  for (Eigen::Index i = 0; i < t.T; ++i) {
    if (!(fields[i].grid == g)) throw ShapeError("all fields must share one grid");
    t.data.col(i) = fields[i].values;
  }
  return t;
}

}  // namespace funvar
