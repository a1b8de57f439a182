#include "nudge/textenc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "nudge/errors.hpp"
#include "nudge/rng.hpp"

namespace nudge {

void TextConfig::validate() const {
  if (vocab <= 0) throw ConfigError("text: vocab must be > 0");
  if (seq_len <= 0) throw ConfigError("text: seq_len must be > 0");
  if (d_t <= 0) throw ConfigError("text: d_t must be > 0");
  if (rank <= 0) throw ConfigError("text: rank must be > 0");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

TokenBatch tokenize(std::string_view text, const TextConfig& config) {
  config.validate();
  const std::vector<std::string> words = split_words(text);
  TokenBatch batch;
  batch.ids.assign(config.seq_len, 0);
  batch.mask.assign(config.seq_len, 0.0);
  batch.word_count = static_cast<int>(words.size());
  batch.empty = words.empty();
  const int n = std::min<int>(config.seq_len, static_cast<int>(words.size()));
  for (int i = 0; i < n; ++i) {
    const uint64_t h = fnv1a64(words[i].data(), words[i].size());
    batch.ids[i] = static_cast<int>(h % static_cast<uint64_t>(config.vocab));
    batch.mask[i] = 1.0;
  }
  return batch;
}

Matrix make_frozen_embedding(const TextConfig& config) {
  config.validate();
  Rng rng = Rng::fork(config.embed_seed, static_cast<uint64_t>(config.vocab) * config.d_t);
  return Matrix::gaussian(config.vocab, config.d_t, 1.0 / std::sqrt(config.d_t), rng);
}

namespace {

Matrix gather(const Matrix& table, const std::vector<int>& ids) {
  Matrix out(static_cast<int>(ids.size()), table.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows) {
      throw UsageError("encode: token id out of range");
    }
    for (int j = 0; j < table.cols; ++j) {
      out.at(static_cast<int>(i), j) = table.at(ids[i], j);
    }
  }
  return out;
}

}  // namespace

Matrix encode_states(const TokenBatch& tokens, const Matrix& frozen_table, const Matrix& lora_a,
                     const Matrix& lora_b) {
  const Matrix base = gather(frozen_table, tokens.ids);
  const Matrix rows = gather(lora_a, tokens.ids);
  return add(base, matmul(rows, lora_b));
}

Matrix masked_mean_pool(const Matrix& states, const std::vector<double>& mask) {
  if (static_cast<int>(mask.size()) != states.rows) {
    throw ShapeError("masked_mean_pool: mask length vs rows mismatch");
  }
  double total = 0.0;
  for (double m : mask) total += m;
  if (total < 1.0) throw PoolingError("masked_mean_pool: all-zero mask");
  Matrix out(1, states.cols);
  for (int i = 0; i < states.rows; ++i) {
    const double w = mask[i] / total;
    if (w == 0.0) continue;
    for (int j = 0; j < states.cols; ++j) out.at(0, j) += w * states.at(i, j);
  }
  return out;
}

EncodeNodes encode_on_tape(GradTape& tape, const TokenBatch& tokens, const Matrix& frozen_table,
                           const Matrix& lora_a, int lora_b_node) {
  EncodeNodes nodes;
  const int frozen_rows = tape.leaf(gather(frozen_table, tokens.ids), false);
  nodes.lora_rows = tape.leaf(gather(lora_a, tokens.ids), true);
  const int delta = tape.matmul(nodes.lora_rows, lora_b_node);
  nodes.states = tape.add(frozen_rows, delta);
  return nodes;
}

}  // namespace nudge
