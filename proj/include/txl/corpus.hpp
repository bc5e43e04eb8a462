#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace txl::corpus {

enum class VocabMode { bytes, chars };

// Symbol <-> id mapping over byte-valued symbols. Byte mode is total with
// V = 256; char mode assigns dense ids to the distinct symbols seen in the
// training split plus one reserved UNK id (the last id) for unseen symbols
// at evaluation time.
struct Vocab {
  VocabMode mode = VocabMode::bytes;
  int size = 0;
  int unk_id = -1;  // char mode only
  std::array<std::int32_t, 256> sym_to_id{};
  std::vector<std::uint8_t> id_to_sym;

  std::vector<std::int32_t> encode(std::string_view text) const;
  std::string decode(std::span<const std::int32_t> ids) const;
};

Vocab build_vocab(VocabMode mode, std::string_view train_text);

struct Corpus {
  Vocab vocab;
  std::vector<std::int32_t> train, valid, test;
};

// Reads the file as bytes and splits it contiguously (train | valid | test,
// no shuffling). Fractions must sum to 1.
Corpus load_corpus(const std::string& path, VocabMode mode, std::array<double, 3> fractions);
Corpus corpus_from_text(std::string_view text, VocabMode mode, std::array<double, 3> fractions);

// Stream where every position from `lag` on repeats the token `lag` steps
// earlier; the first `lag` tokens are uniform over [0, vocab).
std::vector<std::int32_t> make_synthetic_lag_corpus(int vocab, std::int64_t length, std::int64_t lag,
                                                    std::uint64_t seed);

struct SegmentBatch {
  int lanes = 0;
  int seg_len = 0;                          // L' of this step
  std::vector<std::int32_t> inputs;         // [lanes x seg_len]
  std::vector<std::int32_t> targets;        // [lanes x seg_len]
  std::vector<std::uint8_t> continuation;   // per lane; 0 = lane start, reset memory

  std::span<const std::int32_t> lane_inputs(int lane) const;
  std::span<const std::int32_t> lane_targets(int lane) const;
};

// Splits the stream into `lanes` contiguous chunks and walks them in step.
// Within a lane, consecutive batches are adjacent in the stream, so carried
// memory stays meaningful. Remainder tokens past lanes*(T/lanes) are
// dropped.
class SegmentBatcher {
 public:
  SegmentBatcher(std::span<const std::int32_t> stream, int lanes, int seg_len);

  // nullopt at end of epoch; reset() starts the next epoch.
  std::optional<SegmentBatch> next();
  void reset();

  std::int64_t cursor() const { return cursor_; }
  void seek(std::int64_t cursor);  // exact state restore for resume
  std::int64_t lane_len() const { return lane_len_; }

 private:
  std::vector<std::int32_t> stream_;
  int lanes_;
  int seg_len_;
  std::int64_t lane_len_;
  std::int64_t cursor_ = 0;
};

}  // namespace txl::corpus
