#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nudge/matrix.hpp"

namespace nudge {

/// Named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Ordered collection of parameters; order is insertion order and defines the
/// (deterministic) optimizer update and serialization order. Copies are deep.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& other) { *this = other; }
  ParamSet& operator=(const ParamSet& other);
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& add(const std::string& name, Matrix init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  size_t count() const { return items_.size(); }
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::map<std::string, size_t> index_;
};

struct OptimConfig {
  double base_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long total_steps = 1;
};

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)), clamped past the end.
double cosine_lr(const OptimConfig& cfg, long step);

/// AdamW with decoupled weight decay, bias-corrected moments, and a cosine
/// learning-rate schedule over total_steps. Moments are kept per parameter
/// name so optimizer state can round-trip through checkpoints.
class AdamW {
 public:
  explicit AdamW(OptimConfig cfg) : cfg_(cfg) {}

  /// One update over the given parameters using their .grad fields. Throws
  /// TrainingError naming the parameter if a gradient is non-finite; the
  /// step is aborted before any parameter is touched.
  void step(const std::vector<Parameter*>& params);

  long step_count() const { return step_; }
  double current_lr() const { return cosine_lr(cfg_, step_); }
  const OptimConfig& config() const { return cfg_; }

  /// State access for checkpointing.
  struct MomentEntry {
    std::string name;
    const Matrix* first;
    const Matrix* second;
  };
  std::vector<MomentEntry> moments() const;
  void restore(long step, const std::string& name, Matrix first, Matrix second);
  void restore_step(long step) { step_ = step; }

 private:
  struct Slot {
    Matrix m;
    Matrix v;
  };
  OptimConfig cfg_;
  long step_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace nudge
