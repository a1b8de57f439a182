#include "nudge/adapter.hpp"

#include <cmath>

#include "nudge/io.hpp"

namespace nudge {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kPlainResidual: return "plain";
    case Variant::kLargeMlp: return "large-mlp";
    case Variant::kFilm: return "film";
  }
  return "film";
}

Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::kPlainResidual;
  if (s == "large-mlp") return Variant::kLargeMlp;
  if (s == "film") return Variant::kFilm;
  throw ConfigError("unknown variant: " + s + " (expected plain|large-mlp|film)");
}

int AdapterConfig::hidden_dim() const {
  switch (variant) {
    case Variant::kPlainResidual: return hidden_plain;
    case Variant::kLargeMlp: return hidden_large;
    case Variant::kFilm: return hidden_film;
  }
  return hidden_film;
}

int AdapterConfig::head_input_dim() const {
  return variant == Variant::kFilm ? ego_dim : 2 * ego_dim;
}

void AdapterConfig::validate() const {
  if (ego_dim <= 0) throw ConfigError("adapter: ego_dim must be > 0");
  if (hidden_plain <= 0 || hidden_large <= 0 || hidden_film <= 0) {
    throw ConfigError("adapter: hidden sizes must be > 0");
  }
  text.validate();
}

Adapter::Adapter(const AdapterConfig& config) : config_(config) {
  config_.validate();
  frozen_embedding_ = make_frozen_embedding(config_.text);
}

Adapter Adapter::identity_init(const AdapterConfig& config, uint64_t seed) {
  Adapter a(config);
  const TextConfig& tc = config.text;
  const int d_e = config.ego_dim;
  const int d_h = config.hidden_dim();
  const int d_in = config.head_input_dim();

  Rng rb = Rng::fork(seed, 1);
  Rng rp = Rng::fork(seed, 2);
  Rng rw1 = Rng::fork(seed, 3);

  // Low-rank delta: A zero so A*B = 0 at init; B carries the scale.
  a.params_.add("text.lora_a", Matrix(tc.vocab, tc.rank));
  a.params_.add("text.lora_b", Matrix::uniform(tc.rank, tc.d_t, 1.0 / std::sqrt(tc.rank), rb));
  // The projection starts hot (scale 1) so the pooled sentence vector lands
  // at O(0.1) and the text pathways do not spend their budget growing it.
  a.params_.add("text.proj", Matrix::uniform(tc.d_t, d_e, 1.0, rp));

  if (config.variant == Variant::kFilm) {
    a.params_.add("film.scale_w", Matrix(d_e, d_e));
    a.params_.add("film.scale_b", Matrix::full(1, d_e, 1.0));
    a.params_.add("film.shift_w", Matrix(d_e, d_e));
    a.params_.add("film.shift_b", Matrix(1, d_e));
  }

  a.params_.add("head.w1", Matrix::uniform(d_in, d_h, 1.0 / std::sqrt(d_in), rw1));
  a.params_.add("head.b1", Matrix(1, d_h));
  a.params_.add("head.ln_gain", Matrix::full(1, d_h, 1.0));
  a.params_.add("head.ln_bias", Matrix(1, d_h));
  a.params_.add("head.w2", Matrix(d_h, config.output_dim()));
  a.params_.add("head.b2", Matrix(1, config.output_dim()));
  return a;
}

Matrix film_modulate(const Matrix& e, const Matrix& v, const Matrix& scale_w,
                     const Matrix& scale_b, const Matrix& shift_w, const Matrix& shift_b) {
  const Matrix gamma = add(matmul(v, scale_w), scale_b);
  const Matrix beta = add(matmul(v, shift_w), shift_b);
  return add(hadamard(gamma, e), beta);
}

Adapter::Forward Adapter::forward(const EgoFeature& e, const ModeTrajectories& base,
                                  const Command& c, const std::optional<std::string>& text) const {
  const int mode = c.index();  // validates one-hot
  Forward fwd;
  fwd.base = base;
  GradTape& tape = fwd.tape;

  auto node_of = [&](const char* name) {
    const int node = tape.leaf(params_.get(name).value, true);
    fwd.param_nodes.emplace_back(name, node);
    return node;
  };

  // Text pathway: v from pooled token states, or the zero vector for the
  // no-text pass (same architecture, zeroed language signal).
  int v_node = -1;
  TokenBatch tokens;
  if (text.has_value()) tokens = tokenize(*text, config_.text);
  if (text.has_value() && !tokens.empty) {
    fwd.used_text = true;
    const int lora_b = node_of("text.lora_b");
    const EncodeNodes enc =
        encode_on_tape(tape, tokens, frozen_embedding_, params_.get("text.lora_a").value, lora_b);
    fwd.lora_ids = tokens.ids;
    fwd.lora_rows_node = enc.lora_rows;
    const int pooled = tape.masked_mean(enc.states, tokens.mask);
    v_node = tape.matmul(pooled, node_of("text.proj"));
  } else {
    v_node = tape.leaf(Matrix(1, config_.ego_dim), false);
  }
  fwd.text_vector = tape.value(v_node);

  const int e_node = tape.leaf(e, false);  // frozen: no gradient to the planner
  int head_in = -1;
  if (config_.variant == Variant::kFilm) {
    const int gamma = tape.add(tape.matmul(v_node, node_of("film.scale_w")),
                               node_of("film.scale_b"));
    const int beta = tape.add(tape.matmul(v_node, node_of("film.shift_w")),
                              node_of("film.shift_b"));
    head_in = tape.add(tape.mul(gamma, e_node), beta);
    fwd.gamma = tape.value(gamma);
    fwd.beta = tape.value(beta);
  } else {
    head_in = tape.concat_cols(e_node, v_node);
  }

  const int h1 = tape.add(tape.matmul(head_in, node_of("head.w1")), node_of("head.b1"));
  const int ln = tape.layer_norm(h1, node_of("head.ln_gain"), node_of("head.ln_bias"));
  const int act = tape.gelu(ln);
  const int delta = tape.add(tape.matmul(act, node_of("head.w2")), node_of("head.b2"));
  fwd.delta_node = delta;

  Matrix base_row(1, 2 * kHorizonSteps);
  for (int k = 0; k < kHorizonSteps; ++k) {
    base_row.at(0, 2 * k) = base[mode][k].x;
    base_row.at(0, 2 * k + 1) = base[mode][k].y;
  }
  const int base_node = tape.leaf(base_row, false);
  const int delta_row = tape.slice_cols(delta, mode * 2 * kHorizonSteps, 2 * kHorizonSteps);
  fwd.pred_node = tape.add(base_node, delta_row);

  const Matrix& dv = tape.value(delta);
  for (int m = 0; m < kNumModes; ++m) {
    fwd.residual[m].resize(kHorizonSteps);
    for (int k = 0; k < kHorizonSteps; ++k) {
      fwd.residual[m][k] = {dv.at(0, (m * kHorizonSteps + k) * 2),
                            dv.at(0, (m * kHorizonSteps + k) * 2 + 1)};
    }
  }
  const Matrix& pv = tape.value(fwd.pred_node);
  fwd.selected.resize(kHorizonSteps);
  for (int k = 0; k < kHorizonSteps; ++k) {
    fwd.selected[k] = {pv.at(0, 2 * k), pv.at(0, 2 * k + 1)};
  }
  return fwd;
}

Adapter::Forward Adapter::forward_scene(const Scene& scene, const Command& c,
                                        const std::optional<std::string>& text,
                                        const PlannerParams& theta,
                                        const PlannerConfig& planner_config) const {
  const EgoFeature e = extract_ego_feature(scene, planner_config);
  return forward(e, decode_modes(e, theta), c, text);
}

void Adapter::accumulate_grads(const Forward& fwd, double scale) {
  for (const auto& [name, node] : fwd.param_nodes) {
    if (!fwd.tape.has_grad(node)) continue;
    const Matrix& g = fwd.tape.grad(node);
    Parameter& p = params_.get(name);
    for (size_t i = 0; i < p.grad.data.size(); ++i) p.grad.data[i] += scale * g.data[i];
  }
  if (fwd.lora_rows_node >= 0 && fwd.tape.has_grad(fwd.lora_rows_node)) {
    const Matrix& g = fwd.tape.grad(fwd.lora_rows_node);
    Parameter& a = params_.get("text.lora_a");
    for (size_t i = 0; i < fwd.lora_ids.size(); ++i) {
      const int id = fwd.lora_ids[i];
      for (int j = 0; j < g.cols; ++j) {
        a.grad.at(id, j) += scale * g.at(static_cast<int>(i), j);
      }
    }
  }
}

uint64_t Adapter::params_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const Parameter* p : params_.all()) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(double), h);
  }
  return h;
}

void Adapter::tensors_to_archive(TextArchive& archive) const {
  for (const Parameter* p : params_.all()) {
    archive.add_tensor(p->name, p->value);
  }
}

Adapter Adapter::from_archive(const AdapterConfig& config, const TextArchive& archive) {
  Adapter a = identity_init(config, /*seed=*/0);
  for (Parameter* p : a.params_.all()) {
    const Matrix& m = archive.tensor(p->name);
    if (!m.same_shape(p->value)) {
      throw ParseError("checkpoint tensor " + p->name + " has shape " + shape_string(m) +
                       ", expected " + shape_string(p->value));
    }
    p->value = m;
  }
  return a;
}

}  // namespace nudge
