#include "nudge/tape.hpp"

#include <cmath>

#include "nudge/geometry.hpp"

namespace nudge {

namespace {

// sin(t)/t and (1-cos(t))/t with series fallbacks near zero, plus their
// derivatives in t. The forward rollout goes through arc_point so the tape op
// and the frozen decoder agree bit-exactly; backward needs all four helpers.
double sinc_f(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

double sinc_f_prime(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return -t / 3.0 + t * t2 / 30.0;
  }
  return (t * std::cos(t) - std::sin(t)) / (t * t);
}

double vers_g(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return t / 2.0 - t * t2 / 24.0 + t * t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / t;
}

double vers_g_prime(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return 0.5 - t2 / 8.0 + t2 * t2 / 144.0;
  }
  return (t * std::sin(t) - (1.0 - std::cos(t))) / (t * t);
}

}  // namespace

int GradTape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void GradTape::check_node(int node) const {
  if (node < 0 || node >= static_cast<int>(nodes_.size())) {
    throw UsageError("tape: node id out of range");
  }
}

int GradTape::leaf(Matrix value, bool trainable) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = trainable;
  return push(std::move(n));
}

int GradTape::matmul(int a, int b) {
  check_node(a);
  check_node(b);
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = nudge::matmul(nodes_[a].value, nodes_[b].value);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int GradTape::add(int a, int b) {
  check_node(a);
  check_node(b);
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = nudge::add(nodes_[a].value, nodes_[b].value);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int GradTape::mul(int a, int b) {
  check_node(a);
  check_node(b);
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = hadamard(nodes_[a].value, nodes_[b].value);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int GradTape::gelu(int x) {
  check_node(x);
  Node n;
  n.op = Op::kGelu;
  n.a = x;
  n.value = nudge::gelu(nodes_[x].value);
  n.requires_grad = nodes_[x].requires_grad;
  return push(std::move(n));
}

int GradTape::layer_norm(int x, int gain, int bias, double eps) {
  check_node(x);
  check_node(gain);
  check_node(bias);
  const Matrix& xv = nodes_[x].value;
  const Matrix& gv = nodes_[gain].value;
  const Matrix& bv = nodes_[bias].value;
  Node n;
  n.op = Op::kLayerNorm;
  n.a = x;
  n.b = gain;
  n.c = bias;
  n.eps = eps;
  n.value = layer_normalize(xv, gv, bv, eps);
  n.saved = Matrix(xv.rows, 2);
  for (int i = 0; i < xv.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < xv.cols; ++j) mean += xv.at(i, j);
    mean /= xv.cols;
    double var = 0.0;
    for (int j = 0; j < xv.cols; ++j) {
      const double d = xv.at(i, j) - mean;
      var += d * d;
    }
    var /= xv.cols;
    n.saved.at(i, 0) = mean;
    n.saved.at(i, 1) = 1.0 / std::sqrt(var + eps);
  }
  n.requires_grad =
      nodes_[x].requires_grad || nodes_[gain].requires_grad || nodes_[bias].requires_grad;
  return push(std::move(n));
}

int GradTape::masked_mean(int x, std::vector<double> mask) {
  check_node(x);
  const Matrix& xv = nodes_[x].value;
  if (static_cast<int>(mask.size()) != xv.rows) {
    throw ShapeError("masked_mean: mask length " + std::to_string(mask.size()) +
                     " vs rows " + std::to_string(xv.rows));
  }
  double total = 0.0;
  for (double m : mask) total += m;
  if (total < 1.0) {
    throw PoolingError("masked_mean: all-zero mask");
  }
  Node n;
  n.op = Op::kMaskedMean;
  n.a = x;
  n.mask = std::move(mask);
  n.value = Matrix(1, xv.cols);
  for (int i = 0; i < xv.rows; ++i) {
    const double w = n.mask[i] / total;
    if (w == 0.0) continue;
    for (int j = 0; j < xv.cols; ++j) n.value.at(0, j) += w * xv.at(i, j);
  }
  n.requires_grad = nodes_[x].requires_grad;
  return push(std::move(n));
}

int GradTape::gather_rows(int table, std::vector<int> ids) {
  check_node(table);
  const Matrix& tv = nodes_[table].value;
  Node n;
  n.op = Op::kGatherRows;
  n.a = table;
  n.value = Matrix(static_cast<int>(ids.size()), tv.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= tv.rows) {
      throw UsageError("gather_rows: id " + std::to_string(id) + " out of range");
    }
    for (int j = 0; j < tv.cols; ++j) n.value.at(static_cast<int>(i), j) = tv.at(id, j);
  }
  n.ids = std::move(ids);
  n.requires_grad = nodes_[table].requires_grad;
  return push(std::move(n));
}

int GradTape::slice_cols(int x, int begin, int len) {
  check_node(x);
  const Matrix& xv = nodes_[x].value;
  if (begin < 0 || len < 0 || begin + len > xv.cols) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + len) + ") out of " + std::to_string(xv.cols));
  }
  Node n;
  n.op = Op::kSliceCols;
  n.a = x;
  n.begin = begin;
  n.len = len;
  n.value = Matrix(xv.rows, len);
  for (int i = 0; i < xv.rows; ++i) {
    for (int j = 0; j < len; ++j) n.value.at(i, j) = xv.at(i, begin + j);
  }
  n.requires_grad = nodes_[x].requires_grad;
  return push(std::move(n));
}

int GradTape::concat_cols(int a, int b) {
  check_node(a);
  check_node(b);
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  if (av.rows != bv.rows) {
    throw ShapeError("concat_cols: row mismatch " + shape_string(av) + " vs " + shape_string(bv));
  }
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.value = Matrix(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) n.value.at(i, j) = av.at(i, j);
    for (int j = 0; j < bv.cols; ++j) n.value.at(i, av.cols + j) = bv.at(i, j);
  }
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int GradTape::arc_rollout(int kappa, int speed, int steps, double dt) {
  check_node(kappa);
  check_node(speed);
  const Matrix& kv = nodes_[kappa].value;
  const Matrix& sv = nodes_[speed].value;
  if (kv.rows != 1 || kv.cols != 1 || sv.rows != 1 || sv.cols != 1) {
    throw ShapeError("arc_rollout: kappa and speed must be 1x1");
  }
  if (steps <= 0 || dt <= 0.0) {
    throw UsageError("arc_rollout: steps and dt must be positive");
  }
  const double k = kv.data[0];
  const double v = sv.data[0];
  Node n;
  n.op = Op::kArcRollout;
  n.a = kappa;
  n.b = speed;
  n.steps = steps;
  n.dt = dt;
  n.value = Matrix(1, 2 * steps);
  for (int i = 1; i <= steps; ++i) {
    const double t = i * dt;
    const Vec2 p = arc_point(k, v * t);
    n.value.at(0, 2 * (i - 1)) = p.x;
    n.value.at(0, 2 * (i - 1) + 1) = p.y;
  }
  n.requires_grad = nodes_[kappa].requires_grad || nodes_[speed].requires_grad;
  return push(std::move(n));
}

int GradTape::weighted_l1(int x, Matrix target, Matrix weights) {
  check_node(x);
  const Matrix& xv = nodes_[x].value;
  if (!xv.same_shape(target) || !xv.same_shape(weights)) {
    throw ShapeError("weighted_l1: prediction/target/weights shape mismatch");
  }
  Node n;
  n.op = Op::kWeightedL1;
  n.a = x;
  n.value = Matrix(1, 1);
  double loss = 0.0;
  for (size_t i = 0; i < xv.data.size(); ++i) {
    loss += weights.data[i] * std::abs(xv.data[i] - target.data[i]);
  }
  n.value.data[0] = loss;
  n.target = std::move(target);
  n.weights = std::move(weights);
  n.requires_grad = nodes_[x].requires_grad;
  return push(std::move(n));
}

void GradTape::accumulate(int node, const Matrix& g) {
  Node& n = nodes_[node];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Matrix(n.value.rows, n.value.cols);
    n.has_grad = true;
  }
  for (size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += g.data[i];
}

void GradTape::backward(int loss_node) {
  if (nodes_.empty()) throw UsageError("backward: empty tape");
  check_node(loss_node);
  const Matrix& lv = nodes_[loss_node].value;
  if (lv.rows != 1 || lv.cols != 1) {
    throw UsageError("backward: loss must be scalar, got " + shape_string(lv));
  }
  backward(loss_node, Matrix::full(1, 1, 1.0));
}

void GradTape::backward(int node, const Matrix& seed) {
  if (nodes_.empty()) throw UsageError("backward: empty tape");
  check_node(node);
  if (!seed.same_shape(nodes_[node].value)) {
    throw ShapeError("backward: seed shape mismatch");
  }
  accumulate(node, seed);
  for (int id = node; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Matrix& av = nodes_[n.a].value;
        const Matrix& bv = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) accumulate(n.a, nudge::matmul(g, transpose(bv)));
        if (nodes_[n.b].requires_grad) accumulate(n.b, nudge::matmul(transpose(av), g));
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kMul:
        if (nodes_[n.a].requires_grad) accumulate(n.a, hadamard(g, nodes_[n.b].value));
        if (nodes_[n.b].requires_grad) accumulate(n.b, hadamard(g, nodes_[n.a].value));
        break;
      case Op::kGelu: {
        const Matrix& xv = nodes_[n.a].value;
        Matrix dx = g;
        for (size_t i = 0; i < dx.data.size(); ++i) {
          dx.data[i] *= gelu_derivative_scalar(xv.data[i]);
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kLayerNorm: {
        const Matrix& xv = nodes_[n.a].value;
        const Matrix& gv = nodes_[n.b].value;
        const int cols = xv.cols;
        Matrix dx(xv.rows, cols);
        Matrix dgain(1, cols);
        Matrix dbias(1, cols);
        for (int i = 0; i < xv.rows; ++i) {
          const double mean = n.saved.at(i, 0);
          const double inv_std = n.saved.at(i, 1);
          double sum_gdy = 0.0;
          double sum_gdy_xhat = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double xhat = (xv.at(i, j) - mean) * inv_std;
            const double dy = g.at(i, j);
            sum_gdy += gv.data[j] * dy;
            sum_gdy_xhat += gv.data[j] * dy * xhat;
            dgain.data[j] += dy * xhat;
            dbias.data[j] += dy;
          }
          for (int j = 0; j < cols; ++j) {
            const double xhat = (xv.at(i, j) - mean) * inv_std;
            dx.at(i, j) = inv_std * (gv.data[j] * g.at(i, j) - sum_gdy / cols -
                                     xhat * sum_gdy_xhat / cols);
          }
        }
        if (nodes_[n.a].requires_grad) accumulate(n.a, dx);
        if (nodes_[n.b].requires_grad) accumulate(n.b, dgain);
        if (nodes_[n.c].requires_grad) accumulate(n.c, dbias);
        break;
      }
      case Op::kMaskedMean: {
        const Matrix& xv = nodes_[n.a].value;
        double total = 0.0;
        for (double m : n.mask) total += m;
        Matrix dx(xv.rows, xv.cols);
        for (int i = 0; i < xv.rows; ++i) {
          const double w = n.mask[i] / total;
          if (w == 0.0) continue;
          for (int j = 0; j < xv.cols; ++j) dx.at(i, j) = w * g.at(0, j);
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kGatherRows: {
        const Matrix& tv = nodes_[n.a].value;
        Matrix dt(tv.rows, tv.cols);
        for (size_t i = 0; i < n.ids.size(); ++i) {
          const int id = n.ids[i];
          for (int j = 0; j < tv.cols; ++j) {
            dt.at(id, j) += g.at(static_cast<int>(i), j);
          }
        }
        accumulate(n.a, dt);
        break;
      }
      case Op::kSliceCols: {
        const Matrix& xv = nodes_[n.a].value;
        Matrix dx(xv.rows, xv.cols);
        for (int i = 0; i < xv.rows; ++i) {
          for (int j = 0; j < n.len; ++j) dx.at(i, n.begin + j) = g.at(i, j);
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kConcatCols: {
        const Matrix& av = nodes_[n.a].value;
        const Matrix& bv = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) {
          Matrix da(av.rows, av.cols);
          for (int i = 0; i < av.rows; ++i) {
            for (int j = 0; j < av.cols; ++j) da.at(i, j) = g.at(i, j);
          }
          accumulate(n.a, da);
        }
        if (nodes_[n.b].requires_grad) {
          Matrix db(bv.rows, bv.cols);
          for (int i = 0; i < bv.rows; ++i) {
            for (int j = 0; j < bv.cols; ++j) db.at(i, j) = g.at(i, av.cols + j);
          }
          accumulate(n.b, db);
        }
        break;
      }
      case Op::kArcRollout: {
        const double k = nodes_[n.a].value.data[0];
        const double v = nodes_[n.b].value.data[0];
        double dk = 0.0;
        double dv = 0.0;
        for (int i = 1; i <= n.steps; ++i) {
          const double t = i * n.dt;
          const double arc = v * t;
          const double theta = k * arc;
          const double f = sinc_f(theta);
          const double fp = sinc_f_prime(theta);
          const double gg = vers_g(theta);
          const double gp = vers_g_prime(theta);
          const double gx = g.at(0, 2 * (i - 1));
          const double gy = g.at(0, 2 * (i - 1) + 1);
          // x = arc * f(theta), y = arc * g(theta); theta = k * v * t, arc = v * t.
          dk += gx * arc * fp * v * t + gy * arc * gp * v * t;
          dv += gx * (t * f + arc * fp * k * t) + gy * (t * gg + arc * gp * k * t);
        }
        if (nodes_[n.a].requires_grad) accumulate(n.a, Matrix::full(1, 1, dk));
        if (nodes_[n.b].requires_grad) accumulate(n.b, Matrix::full(1, 1, dv));
        break;
      }
      case Op::kWeightedL1: {
        const Matrix& xv = nodes_[n.a].value;
        Matrix dx(xv.rows, xv.cols);
        const double s = g.data[0];
        for (size_t i = 0; i < xv.data.size(); ++i) {
          const double d = xv.data[i] - n.target.data[i];
          const double sign = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          dx.data[i] = s * n.weights.data[i] * sign;
        }
        accumulate(n.a, dx);
        break;
      }
    }
  }
}

const Matrix& GradTape::grad(int node) const {
  check_node(node);
  if (!nodes_[node].has_grad) {
    throw UsageError("grad: node has no gradient (frozen or unreached)");
  }
  return nodes_[node].grad;
}

bool GradTape::has_grad(int node) const {
  check_node(node);
  return nodes_[node].has_grad;
}

void GradTape::clear() { nodes_.clear(); }

}  // namespace nudge
