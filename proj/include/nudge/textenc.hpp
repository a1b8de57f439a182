#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nudge/matrix.hpp"
#include "nudge/tape.hpp"

namespace nudge {

struct TextConfig {
  int vocab = 4096;   // V, hashed
  int seq_len = 16;   // L, padded/truncated
  int d_t = 64;       // token state width
  int rank = 4;       // low-rank delta rank
  uint64_t embed_seed = 0x7ab1e5eedULL;

  void validate() const;
};

/// Hashed token ids with an attention-style mask. word_count is the true
/// pre-truncation count (the stop override keys off it).
struct TokenBatch {
  std::vector<int> ids;
  std::vector<double> mask;
  int word_count = 0;
  bool empty = false;
};

/// Lowercased alphanumeric word split; shared by the tokenizer and the
/// stop-override lexicon matching.
std::vector<std::string> split_words(std::string_view text);

/// Lowercase, split on whitespace/punctuation, hash into [0, vocab),
/// truncate/pad to seq_len. Empty text yields an all-pad batch with zero mask,
/// flagged empty.
TokenBatch tokenize(std::string_view text, const TextConfig& config);

/// Frozen embedding table (vocab x d_t), fixed by embed_seed.
Matrix make_frozen_embedding(const TextConfig& config);

/// Plain (tape-free) encode: rows of E0 + A*B selected by token ids.
Matrix encode_states(const TokenBatch& tokens, const Matrix& frozen_table, const Matrix& lora_a,
                     const Matrix& lora_b);

/// Plain masked mean over rows; PoolingError on an all-zero mask.
Matrix masked_mean_pool(const Matrix& states, const std::vector<double>& mask);

/// Tape-recorded encode. The frozen table rows are gathered outside the tape
/// (no gradient can reach them); only the low-rank delta is trainable. Returns
/// the H_t node; lora_rows_node receives the gathered-rows gradient, which the
/// caller scatters back into the full A tensor by token id.
struct EncodeNodes {
  int states = -1;     // L x d_t
  int lora_rows = -1;  // L x rank leaf (trainable)
};
EncodeNodes encode_on_tape(GradTape& tape, const TokenBatch& tokens, const Matrix& frozen_table,
                           const Matrix& lora_a, int lora_b_node);

}  // namespace nudge
