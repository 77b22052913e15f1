#pragma once

// Dense tensor with canonical column-major layout (mode-1 index fastest) and
// the unfold / fold / mode-n product operations used by the factor code.
//
// Unfolding convention: unfold(X, mode) returns a matrix whose columns are
// indexed by the chosen mode and whose rows run over the remaining indices in
// ascending-mode order, first remaining mode fastest. Unfolding along the
// last (time) mode of an N1 x ... x T tensor therefore gives the
// (N1*...*Nc) x T matrix whose column t is vec of slice t.

#include "funvar/core.hpp"

namespace funvar {

struct Tensor {
  std::vector<Eigen::Index> dims;
  VectorXd data;  // flat, first dim fastest

  static Tensor zeros(std::vector<Eigen::Index> dims) {
    Tensor t;
    t.dims = std::move(dims);
    t.data = VectorXd::Zero(t.size());
    return t;
  }

  Eigen::Index order() const { return static_cast<Eigen::Index>(dims.size()); }

  Eigen::Index size() const {
    Eigen::Index n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  double norm() const { return data.norm(); }
};

// mode is 1-based, per the usual tensor notation.
inline MatrixXd unfold(const Tensor& x, int mode) {
  const Eigen::Index M = x.order();
  if (mode < 1 || mode > M) throw std::out_of_range("unfold: mode out of range");
  const Eigen::Index n = mode - 1;  // 0-based
  const Eigen::Index dn = x.dims[n];
  const Eigen::Index rest = x.size() / dn;

  MatrixXd out(rest, dn);
  // walk flat indices; peel off the mode-n index, keep the rest canonical
  for (Eigen::Index flat = 0; flat < x.size(); ++flat) {
    Eigen::Index rem = flat, col = 0, row = 0, rstride = 1;
    for (Eigen::Index d = 0; d < M; ++d) {
      const Eigen::Index id = rem % x.dims[d];
      rem /= x.dims[d];
      if (d == n) {
        col = id;
      } else {
        row += rstride * id;
        rstride *= x.dims[d];
      }
    }
    out(row, col) = x.data(flat);
  }
  return out;
}

inline Tensor fold(const MatrixXd& m, const std::vector<Eigen::Index>& dims, int mode) {
  const Eigen::Index M = static_cast<Eigen::Index>(dims.size());
  if (mode < 1 || mode > M) throw std::out_of_range("fold: mode out of range");
  const Eigen::Index n = mode - 1;
  Tensor t = Tensor::zeros(dims);
  if (m.cols() != dims[n] || m.rows() != t.size() / dims[n])
    throw ShapeError("fold: matrix shape does not match target dims");
  for (Eigen::Index flat = 0; flat < t.size(); ++flat) {
    Eigen::Index rem = flat, col = 0, row = 0, rstride = 1;
    for (Eigen::Index d = 0; d < M; ++d) {
      const Eigen::Index id = rem % dims[d];
      rem /= dims[d];
      if (d == n) {
        col = id;
      } else {
        row += rstride * id;
        rstride *= dims[d];
      }
    }
    t.data(flat) = m(row, col);
  }
  return t;
}

// Y = X x_mode A : contracts the mode-n index with the columns of A.
inline Tensor mode_n_product(const Tensor& x, const MatrixXd& a, int mode) {
  const Eigen::Index M = x.order();
  if (mode < 1 || mode > M) throw std::out_of_range("mode_n_product: mode out of range");
  if (a.cols() != x.dims[mode - 1])
    throw ShapeError("mode_n_product: matrix columns must match tensor dim");
  MatrixXd unf = unfold(x, mode);          // rest x d_n
  MatrixXd prod = unf * a.transpose();     // rest x rows(a)
  auto dims = x.dims;
  dims[mode - 1] = a.rows();
  return fold(prod, dims, mode);
}

}  // namespace funvar
