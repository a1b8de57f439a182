#pragma once

#include <string>
#include <vector>

#include "nudge/errors.hpp"
#include "nudge/rng.hpp"

namespace nudge {

/// Dense row-major matrix of 64-bit reals. Row vectors (1 x n) are the working
/// representation for features and activations; weights are (in x out) so a
/// forward step is x * W.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, double v) {
    Matrix m(r, c);
    for (double& x : m.data) x = v;
    return m;
  }
  static Matrix row_vector(std::vector<double> v) {
    Matrix m;
    m.rows = 1;
    m.cols = static_cast<int>(v.size());
    m.data = std::move(v);
    return m;
  }
  /// Entries i.i.d. uniform in (-scale, scale).
  static Matrix uniform(int r, int c, double scale, Rng& rng) {
    Matrix m(r, c);
    for (double& x : m.data) x = rng.uniform(-scale, scale);
    return m;
  }
  static Matrix gaussian(int r, int c, double stddev, Rng& rng) {
    Matrix m(r, c);
    for (double& x : m.data) x = stddev * rng.normal();
    return m;
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  void fill(double v) {
    for (double& x : data) x = v;
  }
};

std::string shape_string(const Matrix& m);

/// Standard product; throws ShapeError when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix scale(const Matrix& a, double s);

/// Elementwise tanh-approximation GELU:
/// 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3))).
Matrix gelu(const Matrix& x);
double gelu_scalar(double x);
double gelu_derivative_scalar(double x);

/// Per-row normalization over the last dimension followed by the affine
/// (gain, bias). gain and bias are 1 x cols.
Matrix layer_normalize(const Matrix& x, const Matrix& gain, const Matrix& bias,
                       double eps = 1e-5);

}  // namespace nudge
