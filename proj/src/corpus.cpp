#include "txl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "txl/errors.hpp"
#include "txl/rng.hpp"

namespace txl::corpus {

std::vector<std::int32_t> Vocab::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) {
    std::int32_t id = sym_to_id[c];
    if (id < 0) {
      if (mode == VocabMode::chars) {
        id = unk_id;
      } else {
        throw VocabError("encode: byte outside total byte vocabulary");
      }
    }
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(std::span<const std::int32_t> ids) const {
  std::string text;
  text.reserve(ids.size());
  for (std::int32_t id : ids) {
    if (id < 0 || id >= size) throw VocabError("decode: id outside vocabulary");
    if (mode == VocabMode::chars && id == unk_id) {
      text.push_back('?');
      continue;
    }
    text.push_back(static_cast<char>(id_to_sym[static_cast<std::size_t>(id)]));
  }
  return text;
}

Vocab build_vocab(VocabMode mode, std::string_view train_text) {
  Vocab vocab;
  vocab.mode = mode;
  vocab.sym_to_id.fill(-1);
  if (mode == VocabMode::bytes) {
    vocab.size = 256;
    vocab.id_to_sym.resize(256);
    for (int b = 0; b < 256; ++b) {
      vocab.sym_to_id[b] = b;
      vocab.id_to_sym[b] = static_cast<std::uint8_t>(b);
    }
    return vocab;
  }
  std::array<bool, 256> seen{};
  for (unsigned char c : train_text) seen[c] = true;
  for (int b = 0; b < 256; ++b) {
    if (seen[b]) {
      vocab.sym_to_id[b] = static_cast<std::int32_t>(vocab.id_to_sym.size());
      vocab.id_to_sym.push_back(static_cast<std::uint8_t>(b));
    }
  }
  vocab.unk_id = static_cast<std::int32_t>(vocab.id_to_sym.size());
  vocab.size = vocab.unk_id + 1;
  return vocab;
}

Corpus corpus_from_text(std::string_view text, VocabMode mode, std::array<double, 3> fractions) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  }
  const std::int64_t n = static_cast<std::int64_t>(text.size());
  const std::int64_t n_train = static_cast<std::int64_t>(fractions[0] * n);
  const std::int64_t n_valid = static_cast<std::int64_t>(fractions[1] * n);

  Corpus corpus;
  corpus.vocab = build_vocab(mode, text.substr(0, static_cast<std::size_t>(n_train)));
  corpus.train = corpus.vocab.encode(text.substr(0, static_cast<std::size_t>(n_train)));
  corpus.valid =
      corpus.vocab.encode(text.substr(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_valid)));
  corpus.test = corpus.vocab.encode(text.substr(static_cast<std::size_t>(n_train + n_valid)));
  return corpus;
}

Corpus load_corpus(const std::string& path, VocabMode mode, std::array<double, 3> fractions) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_corpus: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return corpus_from_text(text, mode, fractions);
}

std::vector<std::int32_t> make_synthetic_lag_corpus(int vocab, std::int64_t length, std::int64_t lag,
                                                    std::uint64_t seed) {
  if (vocab <= 0) throw ConfigError("lag corpus: vocab must be positive");
  if (lag <= 0 || lag >= length) throw ConfigError("lag corpus: need 0 < lag < length");
  Rng rng(seed);
  std::vector<std::int32_t> stream(static_cast<std::size_t>(length));
  for (std::int64_t t = 0; t < length; ++t) {
    stream[static_cast<std::size_t>(t)] =
        t < lag ? static_cast<std::int32_t>(rng.uniform_int(vocab))
                : stream[static_cast<std::size_t>(t - lag)];
  }
  return stream;
}

std::span<const std::int32_t> SegmentBatch::lane_inputs(int lane) const {
  return {inputs.data() + static_cast<std::size_t>(lane) * seg_len, static_cast<std::size_t>(seg_len)};
}

std::span<const std::int32_t> SegmentBatch::lane_targets(int lane) const {
  return {targets.data() + static_cast<std::size_t>(lane) * seg_len, static_cast<std::size_t>(seg_len)};
}

SegmentBatcher::SegmentBatcher(std::span<const std::int32_t> stream, int lanes, int seg_len)
    : stream_(stream.begin(), stream.end()), lanes_(lanes), seg_len_(seg_len) {
  if (lanes <= 0) throw ConfigError("batcher: lanes must be positive");
  if (seg_len < 1) throw ConfigError("batcher: segment length must be >= 1");
  lane_len_ = static_cast<std::int64_t>(stream_.size()) / lanes_;
  if (lane_len_ < 2) throw ConfigError("batcher: stream too short for the lane count");
}

std::optional<SegmentBatch> SegmentBatcher::next() {
  // lane_len_-1 usable input positions per lane (the last token only serves
  // as a target).
  const std::int64_t remaining = lane_len_ - 1 - cursor_;
  if (remaining <= 0) return std::nullopt;
  const int take = static_cast<int>(std::min<std::int64_t>(seg_len_, remaining));

  SegmentBatch batch;
  batch.lanes = lanes_;
  batch.seg_len = take;
  batch.inputs.resize(static_cast<std::size_t>(lanes_) * take);
  batch.targets.resize(static_cast<std::size_t>(lanes_) * take);
  batch.continuation.assign(static_cast<std::size_t>(lanes_), cursor_ == 0 ? 0 : 1);
  for (int lane = 0; lane < lanes_; ++lane) {
    const std::int64_t base = static_cast<std::int64_t>(lane) * lane_len_ + cursor_;
    for (int i = 0; i < take; ++i) {
      batch.inputs[static_cast<std::size_t>(lane) * take + i] = stream_[static_cast<std::size_t>(base + i)];
      batch.targets[static_cast<std::size_t>(lane) * take + i] =
          stream_[static_cast<std::size_t>(base + i + 1)];
    }
  }
  cursor_ += take;
  return batch;
}

void SegmentBatcher::reset() { cursor_ = 0; }

void SegmentBatcher::seek(std::int64_t cursor) {
  if (cursor < 0 || cursor > lane_len_ - 1) throw ConfigError("batcher: seek out of range");
  cursor_ = cursor;
}

}  // namespace txl::corpus
