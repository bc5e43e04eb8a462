#include "txl/evaluator.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "txl/errors.hpp"
#include "txl/ops.hpp"

namespace txl::evaluator {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void finalize(EvalResult& result, double elapsed) {
  result.positions = static_cast<std::int64_t>(result.nll.size());
  if (result.positions > 0) {
    double total = 0.0;
    for (double v : result.nll) total += v;
    const double mean = total / static_cast<double>(result.positions);
    result.bpc = mean / std::numbers::ln2;
    result.ppl = std::exp(mean);
  }
  result.tokens_per_sec = elapsed > 0.0 ? static_cast<double>(result.positions) / elapsed : 0.0;
}

}  // namespace

EvalResult eval_xl(const model::ModelParams& params, std::span<const std::int32_t> stream,
                   int mem_len, int seg_len) {
  if (seg_len < 1) throw ConfigError("eval_xl: segment length must be >= 1");
  if (mem_len < 0) throw ConfigError("eval_xl: memory length must be >= 0");
  if (stream.size() < 2) throw ConfigError("eval_xl: stream too short to score");

  NoGradGuard no_grad;
  EvalResult result;
  result.nll.reserve(stream.size() - 1);
  model::MemoryState memory;
  const auto start = Clock::now();
  std::size_t cursor = 0;
  while (cursor + 1 < stream.size()) {
    const std::size_t take = std::min<std::size_t>(seg_len, stream.size() - 1 - cursor);
    model::ForwardOptions opt;
    opt.mem_target = mem_len;
    opt.targets = stream.subspan(cursor + 1, take);
    model::LMOutput out =
        model::forward_segment(params, stream.subspan(cursor, take), memory, opt);
    memory = std::move(out.memory);
    result.nll.insert(result.nll.end(), out.nll.begin(), out.nll.end());
    cursor += take;
  }
  finalize(result, seconds_since(start));
  return result;
}

EvalResult eval_vanilla_sliding(const model::ModelParams& params,
                                std::span<const std::int32_t> stream, int window) {
  if (window < 1) throw ConfigError("eval_vanilla_sliding: window must be >= 1");
  if (stream.size() < 2) throw ConfigError("eval_vanilla_sliding: stream too short to score");

  NoGradGuard no_grad;
  EvalResult result;
  result.nll.reserve(stream.size() - 1);
  const model::MemoryState no_memory;
  const auto start = Clock::now();
  for (std::size_t t = 1; t < stream.size(); ++t) {
    const std::size_t begin = t > static_cast<std::size_t>(window) ? t - window : 0;
    model::ForwardOptions opt;
    opt.mem_target = 0;
    model::LMOutput out =
        model::forward_segment(params, stream.subspan(begin, t - begin), no_memory, opt);
    const Tensor& logits = out.logits;
    const int last = logits.rows() - 1;
    Tensor last_row = ops::slice_rows(logits, last, 1);
    const std::int32_t target[1] = {stream[t]};
    result.nll.push_back(ops::nll_per_position(last_row, target)[0]);
  }
  finalize(result, seconds_since(start));
  return result;
}

namespace {

// Per-token seconds for the sliding regime: every measured position pays a
// forward over exactly `window` tokens.
double time_vanilla(const model::ModelParams& params, std::span<const std::int32_t> stream,
                    int window, std::int64_t sample) {
  NoGradGuard no_grad;
  const std::int64_t span = static_cast<std::int64_t>(stream.size());
  if (span <= window) throw ConfigError("bench: stream shorter than the window");
  const std::int64_t n = std::min(sample, span - window);
  const model::MemoryState no_memory;
  model::ForwardOptions opt;
  opt.mem_target = 0;

  auto score_at = [&](std::int64_t t) {
    model::LMOutput out =
        model::forward_segment(params, stream.subspan(t - window, window), no_memory, opt);
    (void)out;
  };
  score_at(window);  // warmup
  const auto start = Clock::now();
  for (std::int64_t k = 0; k < n; ++k) score_at(window + k);
  return seconds_since(start) / static_cast<double>(n);
}

}  // namespace

std::vector<BenchRow> bench_speed(const model::ModelParams& params,
                                  std::span<const std::int32_t> stream,
                                  const std::vector<int>& contexts, int seg_len,
                                  std::int64_t xl_tokens, std::int64_t vanilla_tokens) {
  if (contexts.empty()) throw ConfigError("bench: no context lengths");
  std::vector<BenchRow> rows;
  const std::int64_t span = static_cast<std::int64_t>(stream.size());
  for (int context : contexts) {
    if (context < 1) throw ConfigError("bench: context must be >= 1");

    // Memory-reuse regime; one warmup pass over a couple of segments.
    const std::size_t warm_len = static_cast<std::size_t>(
        std::min<std::int64_t>(span, 2 * static_cast<std::int64_t>(seg_len) + 1));
    (void)eval_xl(params, stream.subspan(0, warm_len), context, seg_len);
    const std::size_t xl_len =
        static_cast<std::size_t>(std::min<std::int64_t>(span, xl_tokens + 1));
    EvalResult xl = eval_xl(params, stream.subspan(0, xl_len), context, seg_len);
    const double xl_per_token =
        xl.positions > 0 && xl.tokens_per_sec > 0.0 ? 1.0 / xl.tokens_per_sec : 0.0;
    rows.push_back({"xl", context, xl_per_token, 1.0});

    const double vanilla_per_token = time_vanilla(params, stream, context, vanilla_tokens);
    rows.push_back({"vanilla", context, vanilla_per_token,
                    xl_per_token > 0.0 ? vanilla_per_token / xl_per_token : 0.0});
  }
  return rows;
}

const std::vector<double>& LossTable::at_context(int c) const {
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (contexts[i] == c) return losses[i];
  }
  throw ConfigError("loss table: no losses for context " + std::to_string(c));
}

std::string stream_fingerprint(std::span<const std::int32_t> stream) {
  // FNV-1a over the token bytes.
  std::uint64_t h = 1469598103934665603ull;
  for (std::int32_t token : stream) {
    for (int byte = 0; byte < 4; ++byte) {
      h ^= static_cast<std::uint64_t>((token >> (8 * byte)) & 0xff);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LossTable export_losses(const model::ModelParams& params, std::span<const std::int32_t> stream,
                        const std::vector<int>& contexts, const std::string& model_id) {
  if (contexts.empty()) throw ConfigError("export_losses: no context lengths");
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (contexts[i] < 1) throw ConfigError("export_losses: context lengths must be >= 1");
    if (i > 0 && contexts[i] <= contexts[i - 1]) {
      throw ConfigError("export_losses: context lengths must be ascending");
    }
  }
  const std::int64_t t0 = contexts.back();
  if (static_cast<std::int64_t>(stream.size()) <= t0) {
    throw ConfigError("export_losses: stream shorter than the largest context");
  }

  LossTable table;
  table.model_id = model_id;
  table.stream_id = stream_fingerprint(stream);
  table.contexts = contexts;
  table.t0 = t0;
  table.count = static_cast<std::int64_t>(stream.size()) - t0;

  for (int c : contexts) {
    std::vector<double> per_position;
    if (params.config.recurrence) {
      const int seg = std::min(params.config.segment_len, c);
      const int mem = c - seg;
      EvalResult full = eval_xl(params, stream, mem, seg);
      per_position.assign(full.nll.begin() + (t0 - 1), full.nll.end());
    } else {
      EvalResult full = eval_vanilla_sliding(params, stream.subspan(t0 - c), c);
      per_position.assign(full.nll.begin() + (c - 1), full.nll.end());
    }
    if (static_cast<std::int64_t>(per_position.size()) != table.count) {
      throw NumericError("export_losses: coverage mismatch");
    }
    table.losses.push_back(std::move(per_position));
  }
  return table;
}

namespace {
constexpr char kLossMagic[8] = {'T', 'X', 'L', 'L', 'O', 'S', 'S', '\0'};

void write_raw_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_raw_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

void save_loss_table(const std::string& path, const LossTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("loss table: cannot write " + path);
  out.write(kLossMagic, sizeof(kLossMagic));
  const nlohmann::json header{{"model_id", table.model_id},
                              {"stream_id", table.stream_id},
                              {"contexts", table.contexts},
                              {"t0", table.t0},
                              {"count", table.count}};
  const std::string header_text = header.dump();
  write_raw_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& row : table.losses) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    } else {
      for (double v : row) write_raw_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  if (!out) throw IoError("loss table: write failed for " + path);
}

LossTable load_loss_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("loss table: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kLossMagic, sizeof(magic)) != 0) {
    throw IoError("loss table: bad magic in " + path);
  }
  const std::uint64_t header_len = read_raw_u64(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  const nlohmann::json header = nlohmann::json::parse(header_text);

  LossTable table;
  table.model_id = header.at("model_id").get<std::string>();
  table.stream_id = header.at("stream_id").get<std::string>();
  table.contexts = header.at("contexts").get<std::vector<int>>();
  table.t0 = header.at("t0").get<std::int64_t>();
  table.count = header.at("count").get<std::int64_t>();
  for (std::size_t i = 0; i < table.contexts.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(table.count));
    if constexpr (std::endian::native == std::endian::little) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
    } else {
      for (double& v : row) v = std::bit_cast<double>(read_raw_u64(in));
    }
    table.losses.push_back(std::move(row));
  }
  if (!in) throw IoError("loss table: truncated file " + path);
  return table;
}

}  // namespace txl::evaluator
