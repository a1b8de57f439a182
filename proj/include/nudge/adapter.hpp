#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nudge/optim.hpp"
#include "nudge/planner.hpp"
#include "nudge/tape.hpp"
#include "nudge/textenc.hpp"

namespace nudge {

/// Ablation configurations: a plain residual head over [e; v], the same with a
/// wider hidden layer, and FiLM modulation of e ahead of the wide head.
enum class Variant { kPlainResidual, kLargeMlp, kFilm };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct AdapterConfig {
  Variant variant = Variant::kFilm;
  int ego_dim = kEgoFeatureDim;
  int hidden_plain = 32;
  int hidden_large = 128;
  int hidden_film = 128;
  TextConfig text;

  int hidden_dim() const;
  /// e for the FiLM variant, [e; v] for the concat variants.
  int head_input_dim() const;
  int output_dim() const { return kNumModes * kHorizonSteps * 2; }
  void validate() const;
};

/// The language residual branch: frozen embedding + low-rank delta, masked
/// mean pooling, projection, optional FiLM, and the residual MLP head. All
/// trainable tensors live in the ParamSet; the planner side stays frozen.
/// There is no scalar gate on the residual.
class Adapter {
 public:
  /// Identity initialization: scale generator and shift generator weights
  /// zero, scale bias one, head output layer zero, low-rank A zero. The
  /// forward pass is then exactly the frozen planner.
  static Adapter identity_init(const AdapterConfig& config, uint64_t seed);

  const AdapterConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Matrix& frozen_embedding() const { return frozen_embedding_; }

  struct Forward {
    GradTape tape;
    int pred_node = -1;   // 1 x 24 selected trajectory
    int delta_node = -1;  // 1 x 72 residual, all modes
    bool used_text = false;
    Polyline selected;                        // yhat = base[c] + delta[c]
    std::array<Polyline, kNumModes> residual;
    std::array<Polyline, kNumModes> base;
    Matrix text_vector;                       // v (1 x D_e)
    Matrix gamma, beta;                       // film diagnostics (empty otherwise)
    std::vector<std::pair<std::string, int>> param_nodes;  // dense params
    std::vector<int> lora_ids;                // token ids for the A scatter
    int lora_rows_node = -1;
  };

  /// Runs the residual branch over a frozen (e, base) pair. text == nullopt or
  /// empty text takes the no-text path: v is the zero vector through the same
  /// architecture. The command only selects which row is returned.
  Forward forward(const EgoFeature& e, const ModeTrajectories& base, const Command& c,
                  const std::optional<std::string>& text) const;

  /// Convenience: planner decode + forward.
  Forward forward_scene(const Scene& scene, const Command& c,
                        const std::optional<std::string>& text, const PlannerParams& theta,
                        const PlannerConfig& planner_config) const;

  /// Adds tape gradients into the ParamSet accumulators, scaled; handles the
  /// low-rank row-gather scatter. Call after tape.backward().
  void accumulate_grads(const Forward& fwd, double scale);

  /// Tensor fingerprint (values only).
  uint64_t params_hash() const;

  /// Checkpoint round-trip of the trainable tensors (optimizer state and
  /// counters are handled by the trainer's Checkpoint).
  void tensors_to_archive(class TextArchive& archive) const;
  static Adapter from_archive(const AdapterConfig& config, const class TextArchive& archive);

 private:
  explicit Adapter(const AdapterConfig& config);

  AdapterConfig config_;
  ParamSet params_;
  Matrix frozen_embedding_;
};

/// gamma = v W_gamma + b_gamma, beta = v W_beta + b_beta, out = gamma * e + beta.
/// Plain helper mirroring the tape path; used by tests and diagnostics.
Matrix film_modulate(const Matrix& e, const Matrix& v, const Matrix& scale_w,
                     const Matrix& scale_b, const Matrix& shift_w, const Matrix& shift_b);

}  // namespace nudge
