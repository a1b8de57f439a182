#pragma once

#include <optional>
#include <vector>

#include "nudge/matrix.hpp"

namespace nudge {

/// Reverse-mode tape over the small set of primitives the trainable path
/// needs. Each record keeps its inputs' node ids and whatever forward values
/// the backward rule requires. Frozen leaves never receive a gradient; a node
/// requires a gradient only if a trainable leaf sits in its ancestry.
///
/// The tape is rebuilt every training step and cleared in between.
class GradTape {
 public:
  enum class Op {
    kLeaf,
    kMatMul,
    kAdd,
    kMul,
    kGelu,
    kLayerNorm,
    kMaskedMean,
    kGatherRows,
    kSliceCols,
    kConcatCols,
    kArcRollout,
    kWeightedL1,
  };

  /// New leaf holding a value; trainable leaves are gradient sinks.
  int leaf(Matrix value, bool trainable);

  int matmul(int a, int b);
  int add(int a, int b);
  /// Elementwise product.
  int mul(int a, int b);
  int gelu(int x);
  int layer_norm(int x, int gain, int bias, double eps = 1e-5);
  /// Weighted row mean of an L x D matrix; mask is a fixed {0,1} vector with
  /// at least one nonzero entry (PoolingError otherwise).
  int masked_mean(int x, std::vector<double> mask);
  /// Rows of a table selected by index; backward scatter-adds into the table.
  int gather_rows(int table, std::vector<int> ids);
  int slice_cols(int x, int begin, int len);
  int concat_cols(int a, int b);
  /// Constant-curvature, constant-speed unicycle rollout from the origin with
  /// heading +x. kappa and speed are 1x1 nodes; the output is a 1 x (2*steps)
  /// row [x1, y1, x2, y2, ...] sampled every dt seconds. Positive curvature
  /// turns left (+y).
  int arc_rollout(int kappa, int speed, int steps, double dt);
  /// sum_i weights[i] * |x[i] - target[i]| as a 1x1 node. The subgradient at
  /// exact ties is zero.
  int weighted_l1(int x, Matrix target, Matrix weights);

  const Matrix& value(int node) const { return nodes_[node].value; }
  bool requires_grad(int node) const { return nodes_[node].requires_grad; }

  /// Backward pass seeding d(loss)/d(loss) = 1; loss must be 1x1.
  void backward(int loss_node);
  /// Backward pass with an explicit output gradient.
  void backward(int node, const Matrix& seed);

  /// Gradient accumulated at a node; only meaningful after backward() and only
  /// for nodes with requires_grad().
  const Matrix& grad(int node) const;
  bool has_grad(int node) const;

  void clear();
  bool empty() const { return nodes_.empty(); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int c = -1;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    // Op-specific context.
    std::vector<int> ids;
    std::vector<double> mask;
    Matrix target;
    Matrix weights;
    Matrix saved;  // layer_norm: per-row (mean, inv_std)
    double eps = 0.0;
    int begin = 0;
    int len = 0;
    int steps = 0;
    double dt = 0.0;
  };

  int push(Node n);
  void accumulate(int node, const Matrix& g);
  void check_node(int node) const;

  std::vector<Node> nodes_;
};

}  // namespace nudge
