#pragma once

// Evaluation grid and per-period density / CLR fields.
//
// Grids are rectangular with uniform spacing per dimension. Field values are
// stored flat in canonical order: the first dimension's index varies fastest,
// matching the column-major vectorization vec(L_t) used by the tensor code.

#include "funvar/core.hpp"

#include <numeric>

namespace funvar {

struct GridSpec {
  int dims = 0;                                   // number of micro variables
  std::vector<int> points_per_dim;                // N_1 .. N_dims, each >= 2
  std::vector<std::pair<double, double>> bounds;  // (low, high) per dim

  static GridSpec make(std::vector<int> points, std::vector<std::pair<double, double>> bounds) {
    GridSpec g;
    g.dims = static_cast<int>(points.size());
    g.points_per_dim = std::move(points);
    g.bounds = std::move(bounds);
    g.validate();
    return g;
  }

  void validate() const {
    std::vector<std::string> bad;
    if (dims < 1) bad.push_back("grid must have at least one dimension");
    if (static_cast<int>(points_per_dim.size()) != dims ||
        static_cast<int>(bounds.size()) != dims)
      bad.push_back("points/bounds size must match dims");
    else {
      for (int d = 0; d < dims; ++d) {
        if (points_per_dim[d] < 2) bad.push_back("each dimension needs at least 2 points");
        if (!(bounds[d].first < bounds[d].second)) bad.push_back("low bound must be below high");
      }
    }
    if (!bad.empty()) throw ValidationError(bad);
  }

  double spacing(int d) const {
    return (bounds[d].second - bounds[d].first) / static_cast<double>(points_per_dim[d] - 1);
  }

  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dims; ++d) v *= spacing(d);
    return v;
  }

  Eigen::Index n_nodes() const {
    Eigen::Index n = 1;
    for (int d = 0; d < dims; ++d) n *= points_per_dim[d];
    return n;
  }

  double coordinate(int d, int i) const { return bounds[d].first + spacing(d) * i; }

  std::vector<double> axis(int d) const {
    std::vector<double> xs(points_per_dim[d]);
    for (int i = 0; i < points_per_dim[d]; ++i) xs[i] = coordinate(d, i);
    return xs;
  }

  // flat index <-> per-dim indices, first dimension fastest
  std::vector<int> unravel(Eigen::Index flat) const {
    std::vector<int> idx(dims);
    for (int d = 0; d < dims; ++d) {
      idx[d] = static_cast<int>(flat % points_per_dim[d]);
      flat /= points_per_dim[d];
    }
    return idx;
  }

  Eigen::Index ravel(const std::vector<int>& idx) const {
    Eigen::Index flat = 0, stride = 1;
    for (int d = 0; d < dims; ++d) {
      flat += stride * idx[d];
      stride *= points_per_dim[d];
    }
    return flat;
  }

  std::vector<double> node(Eigen::Index flat) const {
    const auto idx = unravel(flat);
    std::vector<double> x(dims);
    for (int d = 0; d < dims; ++d) x[d] = coordinate(d, idx[d]);
    return x;
  }

  bool operator==(const GridSpec& o) const {
    return dims == o.dims && points_per_dim == o.points_per_dim && bounds == o.bounds;
  }
};

// Density on the grid: strictly positive, Riemann sum * cell_volume == 1.
struct DensityField {
  GridSpec grid;
  VectorXd values;

  static DensityField normalized(GridSpec grid, VectorXd raw) {
    if (raw.size() != grid.n_nodes()) throw ShapeError("density values do not match grid");
    if (!(raw.array() >= 0.0).all() || !raw.allFinite())
      throw std::domain_error("density values must be finite and nonnegative");
    const double vmax = raw.maxCoeff();
    if (!(vmax > 0.0)) throw std::domain_error("density is identically zero");
    raw = raw.cwiseMax(1e-12 * vmax);  // CLR needs strict positivity
    const double mass = raw.sum() * grid.cell_volume();
    raw /= mass;
    return DensityField{std::move(grid), std::move(raw)};
  }

  double riemann_mass() const { return values.sum() * grid.cell_volume(); }
};

// CLR-transformed field: grid mean of values is zero.
struct ClrField {
  GridSpec grid;
  VectorXd values;
};

// T stacked CLR fields; data column t holds slice t (canonical node order).
struct ClrTensor {
  GridSpec grid;
  Eigen::Index T = 0;
  MatrixXd data;  // n_nodes x T

  std::vector<Eigen::Index> dim_sizes() const {
    std::vector<Eigen::Index> d;
    for (int i = 0; i < grid.dims; ++i) d.push_back(grid.points_per_dim[i]);
    d.push_back(T);
    return d;
  }
};

}  // namespace funvar
