#include <doctest.h>

#include <numeric>

#include "txl/corpus.hpp"
#include "txl/errors.hpp"

using namespace txl;
using namespace txl::corpus;

TEST_CASE("vocab: char mode round-trips with a reserved unknown id") {
  Corpus corpus = corpus_from_text("abcabc", VocabMode::chars, {1.0, 0.0, 0.0});
  CHECK(corpus.vocab.size == 4);  // a, b, c + UNK
  CHECK(corpus.vocab.unk_id == 3);
  const auto ids = corpus.vocab.encode("abcabc");
  CHECK(corpus.vocab.decode(ids) == "abcabc");

  // Unseen symbol at evaluation time maps to UNK.
  const auto with_unknown = corpus.vocab.encode("abz");
  CHECK(with_unknown[2] == corpus.vocab.unk_id);
}

TEST_CASE("vocab: byte mode is total with V = 256") {
  Corpus corpus = corpus_from_text("hi", VocabMode::bytes, {1.0, 0.0, 0.0});
  CHECK(corpus.vocab.size == 256);
  std::string all_bytes;
  for (int b = 0; b < 256; ++b) all_bytes.push_back(static_cast<char>(b));
  const auto ids = corpus.vocab.encode(all_bytes);
  CHECK(corpus.vocab.decode(ids) == all_bytes);
}

TEST_CASE("splits: contiguous fractions, no shuffling") {
  std::string text(1000, 'x');
  for (std::size_t i = 0; i < text.size(); ++i) text[i] = static_cast<char>('a' + i % 7);
  Corpus corpus = corpus_from_text(text, VocabMode::chars, {0.8, 0.1, 0.1});
  CHECK(corpus.train.size() == 800);
  CHECK(corpus.valid.size() == 100);
  CHECK(corpus.test.size() == 100);
  // Concatenated splits reproduce the stream.
  const auto all = corpus.vocab.encode(text);
  std::vector<std::int32_t> glued = corpus.train;
  glued.insert(glued.end(), corpus.valid.begin(), corpus.valid.end());
  glued.insert(glued.end(), corpus.test.begin(), corpus.test.end());
  CHECK(glued == all);

  CHECK_THROWS_AS(corpus_from_text(text, VocabMode::chars, {0.5, 0.2, 0.2}), ConfigError);
}

TEST_CASE("batcher: single lane walks the stream with a short tail") {
  std::vector<std::int32_t> stream(10);
  std::iota(stream.begin(), stream.end(), 0);
  SegmentBatcher batcher(stream, 1, 4);

  auto batch = batcher.next();
  REQUIRE(batch);
  CHECK(batch->seg_len == 4);
  CHECK(batch->inputs == std::vector<std::int32_t>{0, 1, 2, 3});
  CHECK(batch->targets == std::vector<std::int32_t>{1, 2, 3, 4});
  CHECK(batch->continuation == std::vector<std::uint8_t>{0});

  batch = batcher.next();
  REQUIRE(batch);
  CHECK(batch->inputs == std::vector<std::int32_t>{4, 5, 6, 7});
  CHECK(batch->targets == std::vector<std::int32_t>{5, 6, 7, 8});
  CHECK(batch->continuation == std::vector<std::uint8_t>{1});

  // Final short segment: only token 8 still has a target.
  batch = batcher.next();
  REQUIRE(batch);
  CHECK(batch->seg_len == 1);
  CHECK(batch->inputs == std::vector<std::int32_t>{8});
  CHECK(batch->targets == std::vector<std::int32_t>{9});

  CHECK_FALSE(batcher.next());
  batcher.reset();
  auto again = batcher.next();
  REQUIRE(again);
  CHECK(again->inputs == std::vector<std::int32_t>{0, 1, 2, 3});
  CHECK(again->continuation == std::vector<std::uint8_t>{0});
}

TEST_CASE("batcher: lanes are contiguous chunks and stay adjacent") {
  std::vector<std::int32_t> stream(10);
  std::iota(stream.begin(), stream.end(), 0);
  SegmentBatcher batcher(stream, 2, 2);

  // Lane 0 covers 0..4, lane 1 covers 5..9.
  std::vector<std::int32_t> lane0, lane1;
  bool first = true;
  while (auto batch = batcher.next()) {
    const auto in0 = batch->lane_inputs(0);
    const auto in1 = batch->lane_inputs(1);
    lane0.insert(lane0.end(), in0.begin(), in0.end());
    lane1.insert(lane1.end(), in1.begin(), in1.end());
    for (int lane = 0; lane < 2; ++lane) {
      CHECK(batch->continuation[lane] == (first ? 0 : 1));
    }
    // Targets are the inputs shifted by one inside the lane.
    for (int lane = 0; lane < 2; ++lane) {
      const auto in = batch->lane_inputs(lane);
      const auto tgt = batch->lane_targets(lane);
      for (std::size_t i = 0; i + 1 < in.size(); ++i) CHECK(tgt[i] == in[i + 1]);
    }
    first = false;
  }
  // Concatenating yielded segments reproduces each lane's stream (inputs
  // stop one short of the lane end; the last token is only ever a target).
  CHECK(lane0 == std::vector<std::int32_t>{0, 1, 2, 3});
  CHECK(lane1 == std::vector<std::int32_t>{5, 6, 7, 8});
}

TEST_CASE("batcher: lane adjacency property on random shapes") {
  for (int trial = 0; trial < 10; ++trial) {
    const int lanes = 1 + trial % 4;
    const int seg_len = 1 + (trial * 3) % 5;
    std::vector<std::int32_t> stream(37 + trial * 11);
    std::iota(stream.begin(), stream.end(), 100);
    SegmentBatcher batcher(stream, lanes, seg_len);
    const std::int64_t lane_len = batcher.lane_len();

    std::vector<std::vector<std::int32_t>> seen(lanes);
    while (auto batch = batcher.next()) {
      for (int lane = 0; lane < lanes; ++lane) {
        const auto in = batch->lane_inputs(lane);
        seen[lane].insert(seen[lane].end(), in.begin(), in.end());
      }
    }
    for (int lane = 0; lane < lanes; ++lane) {
      REQUIRE(static_cast<std::int64_t>(seen[lane].size()) == lane_len - 1);
      for (std::int64_t i = 0; i < lane_len - 1; ++i) {
        CHECK(seen[lane][i] == stream[lane * lane_len + i]);
      }
    }
  }
}

TEST_CASE("lag corpus: construction invariants") {
  const auto stream = make_synthetic_lag_corpus(16, 500, 48, 7);
  REQUIRE(stream.size() == 500);
  for (std::size_t t = 48; t < stream.size(); ++t) {
    CHECK(stream[t] == stream[t - 48]);
  }
  for (std::int32_t token : stream) {
    CHECK(token >= 0);
    CHECK(token < 16);
  }

  // K = 1 collapses to a constant stream after the first token.
  const auto constant = make_synthetic_lag_corpus(16, 64, 1, 3);
  for (std::size_t t = 1; t < constant.size(); ++t) CHECK(constant[t] == constant[0]);

  // Deterministic in the seed.
  CHECK(make_synthetic_lag_corpus(16, 500, 48, 7) == stream);
  CHECK(make_synthetic_lag_corpus(16, 500, 48, 8) != stream);

  CHECK_THROWS_AS(make_synthetic_lag_corpus(16, 10, 10, 0), ConfigError);
}
