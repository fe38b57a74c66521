#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace disco {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Just enough linear algebra for the
// forward/backward passes; nothing here allocates during matvec.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at_flat(std::size_t k) { return data_[k]; }
  double at_flat(std::size_t k) const { return data_[k]; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = M x
inline Vec matvec(const Matrix& m, const Vec& x) {
  if (x.size() != m.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(m.rows(), 0.0);
  const double* row = m.data();
  for (std::size_t i = 0; i < m.rows(); ++i, row += m.cols()) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y = M^T x
inline Vec matvec_t(const Matrix& m, const Vec& x) {
  if (x.size() != m.rows()) throw std::invalid_argument("matvec_t: dimension mismatch");
  Vec y(m.cols(), 0.0);
  const double* row = m.data();
  for (std::size_t i = 0; i < m.rows(); ++i, row += m.cols()) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += row[j] * xi;
  }
  return y;
}

// M += scale * u v^T
inline void add_outer(Matrix& m, const Vec& u, const Vec& v, double scale) {
  if (u.size() != m.rows() || v.size() != m.cols())
    throw std::invalid_argument("add_outer: dimension mismatch");
  double* row = m.data();
  for (std::size_t i = 0; i < m.rows(); ++i, row += m.cols()) {
    const double s = scale * u[i];
    if (s == 0.0) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += s * v[j];
  }
}

inline void add_scaled(Matrix& dst, const Matrix& src, double scale) {
  if (!dst.same_shape(src)) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t k = 0; k < dst.size(); ++k) dst.at_flat(k) += scale * src.at_flat(k);
}

}  // namespace disco
