#include "nudge/matrix.hpp"

#include <cmath>

namespace nudge {

namespace {
constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.141592653589793238462643383279502884);
}  // namespace

bool Matrix::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: " + shape_string(a) + " incompatible with " + shape_string(b));
  }
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("sub: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("hadamard: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& x : c.data) x *= s;
  return c;
}

double gelu_scalar(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative_scalar(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Matrix gelu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data) v = gelu_scalar(v);
  return y;
}

Matrix layer_normalize(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
  if (gain.rows != 1 || gain.cols != x.cols || bias.rows != 1 || bias.cols != x.cols) {
    throw ShapeError("layer_normalize: gain/bias must be 1x" + std::to_string(x.cols));
  }
  Matrix y(x.rows, x.cols);
  const int n = x.cols;
  for (int i = 0; i < x.rows; ++i) {
    const double* row = &x.data[static_cast<size_t>(i) * n];
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      y.at(i, j) = gain.data[j] * (row[j] - mean) * inv_std + bias.data[j];
    }
  }
  return y;
}

}  // namespace nudge
