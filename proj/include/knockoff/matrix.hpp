#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace knockoff {

// Row-major dense matrix of doubles. Sized for MLPs with a few thousand
// parameters; nothing here tries to be clever.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void fill(double v) { data.assign(data.size(), v); }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
};

// y = W x
inline void matvec(const DenseMatrix& w, const std::vector<double>& x, std::vector<double>& y) {
  if (x.size() != w.cols) throw std::invalid_argument("matvec: dimension mismatch");
  y.assign(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* row = w.data.data() + i * w.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// y = W^T x
inline void matvec_transposed(const DenseMatrix& w, const std::vector<double>& x, std::vector<double>& y) {
  if (x.size() != w.rows) throw std::invalid_argument("matvec_transposed: dimension mismatch");
  y.assign(w.cols, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* row = w.data.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += row[j] * x[i];
  }
}

// A += scale * (u v^T)
inline void add_outer(DenseMatrix& a, const std::vector<double>& u, const std::vector<double>& v, double scale) {
  if (u.size() != a.rows || v.size() != a.cols) throw std::invalid_argument("add_outer: dimension mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* row = a.data.data() + i * a.cols;
    double s = scale * u[i];
    for (std::size_t j = 0; j < a.cols; ++j) row[j] += s * v[j];
  }
}

}  // namespace knockoff
