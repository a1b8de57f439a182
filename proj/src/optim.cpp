#include "nudge/optim.hpp"

#include <cmath>

#include "nudge/errors.hpp"

namespace nudge {

ParamSet& ParamSet::operator=(const ParamSet& other) {
  if (this == &other) return *this;
  items_.clear();
  index_ = other.index_;
  items_.reserve(other.items_.size());
  for (const auto& p : other.items_) {
    items_.push_back(std::make_unique<Parameter>(*p));
  }
  return *this;
}

Parameter& ParamSet::add(const std::string& name, Matrix init) {
  if (index_.count(name)) throw UsageError("ParamSet: duplicate parameter " + name);
  items_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  index_[name] = items_.size() - 1;
  return *items_.back();
}

Parameter& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("ParamSet: unknown parameter " + name);
  return *items_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("ParamSet: unknown parameter " + name);
  return *items_[it->second];
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  out.reserve(items_.size());
  for (auto& p : items_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(items_.size());
  for (auto& p : items_) out.push_back(p.get());
  return out;
}

void ParamSet::zero_grads() {
  for (auto& p : items_) p->zero_grad();
}

double cosine_lr(const OptimConfig& cfg, long step) {
  if (cfg.total_steps <= 0) return cfg.base_lr;
  const double s = static_cast<double>(step < cfg.total_steps ? step : cfg.total_steps);
  return cfg.base_lr * 0.5 *
         (1.0 + std::cos(3.141592653589793238462643383279502884 * s / cfg.total_steps));
}

void AdamW::step(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw TrainingError("AdamW: non-finite gradient for parameter " + p->name);
    }
  }
  // Learning rate for this step uses the pre-increment counter so the first
  // step sees lr(0) = base_lr and the schedule decays to zero at total_steps.
  const double lr = cosine_lr(cfg_, step_);
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (Parameter* p : params) {
    Slot& slot = slots_[p->name];
    if (slot.m.size() == 0) {
      slot.m = Matrix(p->value.rows, p->value.cols);
      slot.v = Matrix(p->value.rows, p->value.cols);
    }
    if (!slot.m.same_shape(p->value)) {
      throw ShapeError("AdamW: moment shape mismatch for " + p->name);
    }
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double g = p->grad.data[i];
      slot.m.data[i] = cfg_.beta1 * slot.m.data[i] + (1.0 - cfg_.beta1) * g;
      slot.v.data[i] = cfg_.beta2 * slot.v.data[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = slot.m.data[i] / bc1;
      const double vhat = slot.v.data[i] / bc2;
      double x = p->value.data[i];
      x -= lr * cfg_.weight_decay * x;  // decoupled decay
      x -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      p->value.data[i] = x;
    }
  }
}

std::vector<AdamW::MomentEntry> AdamW::moments() const {
  std::vector<MomentEntry> out;
  for (const auto& [name, slot] : slots_) {
    out.push_back({name, &slot.m, &slot.v});
  }
  return out;
}

void AdamW::restore(long step, const std::string& name, Matrix first, Matrix second) {
  step_ = step;
  Slot& slot = slots_[name];
  slot.m = std::move(first);
  slot.v = std::move(second);
}

}  // namespace nudge
