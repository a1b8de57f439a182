#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nudge/textenc.hpp"

using namespace nudge;

TEST_CASE("tokenize folds case and splits on punctuation") {
  const TextConfig cfg;
  const TokenBatch a = tokenize("Stop", cfg);
  const TokenBatch b = tokenize("stop", cfg);
  CHECK(a.ids == b.ids);
  CHECK(a.word_count == 1);
  CHECK(a.mask[0] == 1.0);
  CHECK(a.mask[1] == 0.0);

  const auto words = split_words("Turn left, then STOP!");
  REQUIRE(words.size() == 4);
  CHECK(words[0] == "turn");
  CHECK(words[1] == "left");
  CHECK(words[2] == "then");
  CHECK(words[3] == "stop");
}

TEST_CASE("tokenize truncates to the sequence length but keeps the true count") {
  const TextConfig cfg;
  std::string long_text;
  for (int i = 0; i < 20; ++i) long_text += "word" + std::string(1, char('a' + i)) + " ";
  const TokenBatch batch = tokenize(long_text, cfg);
  CHECK(static_cast<int>(batch.ids.size()) == cfg.seq_len);
  CHECK(batch.word_count == 20);
  for (double m : batch.mask) CHECK(m == 1.0);
}

TEST_CASE("empty text produces a flagged all-pad batch") {
  const TextConfig cfg;
  const TokenBatch batch = tokenize("", cfg);
  CHECK(batch.empty);
  CHECK(batch.word_count == 0);
  for (double m : batch.mask) CHECK(m == 0.0);

  const TokenBatch punct = tokenize("...!!!", cfg);
  CHECK(punct.empty);
}

TEST_CASE("token ids stay in vocabulary range and are deterministic") {
  const TextConfig cfg;
  const TokenBatch a = tokenize("please stop at the curb right now", cfg);
  const TokenBatch b = tokenize("please stop at the curb right now", cfg);
  CHECK(a.ids == b.ids);
  for (int id : a.ids) {
    CHECK(id >= 0);
    CHECK(id < cfg.vocab);
  }
}

TEST_CASE("encode at initialization is exactly the frozen table lookup") {
  TextConfig cfg;
  cfg.vocab = 128;  // small table keeps the test fast
  const Matrix table = make_frozen_embedding(cfg);
  const Matrix lora_a(cfg.vocab, cfg.rank);  // zero
  Rng rng(4);
  const Matrix lora_b = Matrix::uniform(cfg.rank, cfg.d_t, 0.5, rng);
  const TokenBatch tokens = tokenize("turn left at the fork", cfg);
  const Matrix states = encode_states(tokens, table, lora_a, lora_b);
  for (int l = 0; l < cfg.seq_len; ++l) {
    for (int j = 0; j < cfg.d_t; ++j) {
      CHECK(states.at(l, j) == table.at(tokens.ids[l], j));
    }
  }
}

TEST_CASE("frozen table rows never receive gradients; the low-rank pair does") {
  TextConfig cfg;
  cfg.vocab = 64;
  const Matrix table = make_frozen_embedding(cfg);
  Rng rng(9);
  Matrix lora_a = Matrix::uniform(cfg.vocab, cfg.rank, 0.1, rng);
  const Matrix lora_b = Matrix::uniform(cfg.rank, cfg.d_t, 0.5, rng);
  const TokenBatch tokens = tokenize("go straight ahead", cfg);

  GradTape tape;
  const int b_node = tape.leaf(lora_b, true);
  const EncodeNodes enc = encode_on_tape(tape, tokens, table, lora_a, b_node);
  const int pooled = tape.masked_mean(enc.states, tokens.mask);
  const int loss =
      tape.weighted_l1(pooled, Matrix(1, cfg.d_t), Matrix::full(1, cfg.d_t, 1.0));
  tape.backward(loss);
  CHECK(tape.has_grad(enc.lora_rows));
  CHECK(tape.has_grad(b_node));
  CHECK(tape.grad(b_node).all_finite());

  // Perturbing a used frozen row changes the states but not the gradient path.
  Matrix poked = table;
  poked.at(tokens.ids[0], 0) += 1.0;
  GradTape tape2;
  const int b2 = tape2.leaf(lora_b, true);
  const EncodeNodes enc2 = encode_on_tape(tape2, tokens, poked, lora_a, b2);
  CHECK(tape2.value(enc2.states).at(0, 0) != tape.value(enc.states).at(0, 0));
}

TEST_CASE("masked mean pooling") {
  Rng rng(12);
  Matrix states = Matrix::uniform(4, 3, 1.0, rng);

  SUBCASE("full mask is the plain row mean") {
    const Matrix u = masked_mean_pool(states, {1.0, 1.0, 1.0, 1.0});
    for (int j = 0; j < 3; ++j) {
      double mean = 0.0;
      for (int i = 0; i < 4; ++i) mean += states.at(i, j) / 4.0;
      CHECK(u.at(0, j) == doctest::Approx(mean).epsilon(1e-15));
    }
  }

  SUBCASE("a single unmasked row passes through") {
    const Matrix u = masked_mean_pool(states, {0.0, 1.0, 0.0, 0.0});
    for (int j = 0; j < 3; ++j) CHECK(u.at(0, j) == states.at(1, j));
  }

  SUBCASE("masked-out rows are ignored whatever they contain") {
    const Matrix base = masked_mean_pool(states, {1.0, 0.0, 1.0, 0.0});
    for (int trial = 0; trial < 20; ++trial) {
      Matrix noisy = states;
      for (int j = 0; j < 3; ++j) {
        noisy.at(1, j) = rng.uniform(-100.0, 100.0);
        noisy.at(3, j) = rng.uniform(-100.0, 100.0);
      }
      const Matrix u = masked_mean_pool(noisy, {1.0, 0.0, 1.0, 0.0});
      for (int j = 0; j < 3; ++j) CHECK(u.at(0, j) == base.at(0, j));
    }
  }

  SUBCASE("an all-zero mask is a pooling error") {
    CHECK_THROWS_AS(masked_mean_pool(states, {0.0, 0.0, 0.0, 0.0}), PoolingError);
  }
}
