// txl: train / eval / bench / export-losses / recl / generate for the
// segment-recurrence language-model toolkit.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "txl/checkpoint.hpp"
#include "txl/config.hpp"
#include "txl/corpus.hpp"
#include "txl/errors.hpp"
#include "txl/evaluator.hpp"
#include "txl/kernels.hpp"
#include "txl/model.hpp"
#include "txl/recl.hpp"
#include "txl/sampler.hpp"
#include "txl/trainer.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitNumeric = 3;

void force_kernels(const std::string& name) {
  if (name.empty()) return;
  if (!txl::kernels::select(name)) {
    throw txl::ConfigError("unknown or unavailable kernel backend: " + name);
  }
}

txl::corpus::VocabMode vocab_mode_from_name(const std::string& name) {
  if (name == "byte") return txl::corpus::VocabMode::bytes;
  if (name == "char") return txl::corpus::VocabMode::chars;
  throw txl::ConfigError("vocab_mode must be byte or char, got " + name);
}

std::array<double, 3> parse_splits(const std::string& text) {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  if (text.empty()) return fractions;
  std::istringstream in(text);
  std::string token;
  int i = 0;
  while (std::getline(in, token, ',') && i < 3) fractions[i++] = std::stod(token);
  if (i != 3) throw txl::ConfigError("--splits needs three comma-separated fractions");
  return fractions;
}

json vocab_to_json(const txl::corpus::Vocab& vocab) {
  return json{{"mode", vocab.mode == txl::corpus::VocabMode::bytes ? "byte" : "char"},
              {"symbols", std::vector<int>(vocab.id_to_sym.begin(), vocab.id_to_sym.end())},
              {"unk_id", vocab.unk_id}};
}

txl::corpus::Vocab vocab_from_json(const json& j) {
  txl::corpus::Vocab vocab;
  const std::string mode = j.at("mode").get<std::string>();
  vocab.mode = mode == "byte" ? txl::corpus::VocabMode::bytes : txl::corpus::VocabMode::chars;
  vocab.sym_to_id.fill(-1);
  const auto symbols = j.at("symbols").get<std::vector<int>>();
  for (std::size_t id = 0; id < symbols.size(); ++id) {
    vocab.id_to_sym.push_back(static_cast<std::uint8_t>(symbols[id]));
    vocab.sym_to_id[static_cast<std::size_t>(symbols[id])] = static_cast<std::int32_t>(id);
  }
  vocab.unk_id = j.at("unk_id").get<int>();
  vocab.size = static_cast<int>(symbols.size()) + (vocab.mode == txl::corpus::VocabMode::chars ? 1 : 0);
  return vocab;
}

struct LoadedCheckpoint {
  txl::model::ModelParams params;
  txl::corpus::Vocab vocab;
  txl::checkpoint::Checkpoint raw;
};

LoadedCheckpoint load_model_checkpoint(const std::string& path) {
  LoadedCheckpoint loaded{txl::model::ModelParams{}, txl::corpus::Vocab{}, txl::checkpoint::load(path)};
  loaded.params = txl::checkpoint::to_model(loaded.raw);
  if (loaded.raw.aux.is_object() && loaded.raw.aux.contains("vocab")) {
    loaded.vocab = vocab_from_json(loaded.raw.aux.at("vocab"));
  } else {
    throw txl::IoError("checkpoint has no vocabulary record: " + path);
  }
  return loaded;
}

// Re-encodes the requested split of a data file with the checkpoint's vocab
// so ids always match the trained model.
std::vector<std::int32_t> load_split_with_vocab(const std::string& path,
                                                const txl::corpus::Vocab& vocab,
                                                const std::array<double, 3>& fractions,
                                                const std::string& split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw txl::IoError("cannot open data file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::int64_t n = static_cast<std::int64_t>(text.size());
  const std::int64_t n_train = static_cast<std::int64_t>(fractions[0] * n);
  const std::int64_t n_valid = static_cast<std::int64_t>(fractions[1] * n);
  std::string_view view(text);
  if (split == "train") return vocab.encode(view.substr(0, n_train));
  if (split == "valid") return vocab.encode(view.substr(n_train, n_valid));
  if (split == "test") return vocab.encode(view.substr(n_train + n_valid));
  throw txl::ConfigError("--split must be train, valid or test");
}

txl::model::ModelConfig model_config_from_file(const txl::config::KeyValueFile& file, int vocab_size) {
  txl::model::ModelConfig mc;
  mc.vocab_size = vocab_size;
  mc.n_layers = static_cast<int>(file.get_int("n_layers", 2));
  mc.d_model = static_cast<int>(file.get_int("d_model", 64));
  mc.n_heads = static_cast<int>(file.get_int("n_heads", 2));
  mc.d_head = static_cast<int>(file.get_int("d_head", mc.d_model / mc.n_heads));
  mc.d_ff = static_cast<int>(file.get_int("d_ff", 2 * mc.d_model));
  mc.segment_len = static_cast<int>(file.get_int("segment_len", 16));
  mc.mem_len_train = static_cast<int>(file.get_int("mem_len_train", mc.segment_len));
  mc.mem_len_eval = static_cast<int>(file.get_int("mem_len_eval", mc.mem_len_train));
  mc.encoding = txl::model::encoding_from_name(file.get_string("encoding", "relative"));
  mc.recurrence = file.get_bool("recurrence", true);
  mc.loss_mode = txl::model::loss_mode_from_name(file.get_string("loss_mode", "full"));
  mc.dropout = file.get_double("dropout", 0.0);
  mc.tie_embeddings = file.get_bool("tie_embeddings", true);
  mc.seed = static_cast<std::uint64_t>(file.get_int("seed", 0));
  return mc;
}

txl::trainer::TrainConfig train_config_from_file(const txl::config::KeyValueFile& file) {
  txl::trainer::TrainConfig tc;
  tc.steps = file.get_int("steps", 1000);
  tc.batch_lanes = static_cast<int>(file.get_int("batch_lanes", 8));
  tc.lr = file.get_double("lr", 3e-3);
  tc.beta1 = file.get_double("beta1", 0.9);
  tc.beta2 = file.get_double("beta2", 0.999);
  tc.adam_eps = file.get_double("adam_eps", 1e-8);
  tc.weight_decay = file.get_double("weight_decay", 0.0);
  tc.clip_norm = file.get_double("clip_norm", 1.0);
  tc.warmup_steps = file.get_int("warmup_steps", -1);
  const std::string schedule = file.get_string("schedule", "cosine");
  if (schedule == "cosine") {
    tc.schedule = txl::trainer::Schedule::cosine;
  } else if (schedule == "constant") {
    tc.schedule = txl::trainer::Schedule::constant;
  } else {
    throw txl::ConfigError("schedule must be cosine or constant, got " + schedule);
  }
  tc.log_every = file.get_int("log_every", 50);
  tc.ckpt_every = file.get_int("ckpt_every", 0);
  tc.seed = static_cast<std::uint64_t>(file.get_int("seed", 0));
  return tc;
}

int cmd_train(const std::string& config_path, const std::string& data_override,
              std::int64_t steps_override, std::int64_t seed_override, const std::string& out_dir,
              const std::string& resume_path, const std::string& kernels_name) {
  force_kernels(kernels_name);
  const auto file = txl::config::KeyValueFile::parse_file(config_path);

  const std::string data_path = data_override.empty() ? file.get_string("data") : data_override;
  const auto mode = vocab_mode_from_name(file.get_string("vocab_mode", "byte"));
  const std::array<double, 3> fractions{file.get_double("split_train", 0.8),
                                        file.get_double("split_valid", 0.1),
                                        file.get_double("split_test", 0.1)};
  txl::corpus::Corpus corpus = txl::corpus::load_corpus(data_path, mode, fractions);

  txl::model::ModelConfig mc = model_config_from_file(file, corpus.vocab.size);
  txl::trainer::TrainConfig tc = train_config_from_file(file);
  if (steps_override >= 0) tc.steps = steps_override;
  if (seed_override >= 0) {
    mc.seed = static_cast<std::uint64_t>(seed_override);
    tc.seed = static_cast<std::uint64_t>(seed_override);
  }
  const auto unread = file.unread_keys();
  if (!unread.empty()) {
    std::string joined;
    for (const auto& key : unread) joined += " " + key;
    throw txl::ConfigError("unknown config keys:" + joined);
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir + "/metrics.jsonl");
  if (!metrics) throw txl::IoError("cannot write metrics in " + out_dir);

  txl::trainer::Trainer trainer(txl::model::init_model(mc), tc, corpus.train);
  if (!resume_path.empty()) {
    trainer.restore(txl::checkpoint::load(resume_path));
    std::cerr << "resumed from " << resume_path << " at step " << trainer.step_count() << "\n";
  }

  const json vocab_record = vocab_to_json(corpus.vocab);
  auto save_with_vocab = [&](const txl::trainer::Trainer& t, const std::string& path) {
    txl::checkpoint::Checkpoint ckpt = t.to_checkpoint();
    ckpt.aux["vocab"] = vocab_record;
    txl::checkpoint::save(path, ckpt);
  };

  auto last_log = std::chrono::steady_clock::now();
  std::int64_t tokens_since_log = 0;
  txl::trainer::train_loop(
      trainer,
      [&](const txl::trainer::StepResult& r) {
        tokens_since_log += r.tokens;
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_log).count();
        const double tps = elapsed > 0 ? static_cast<double>(tokens_since_log) / elapsed : 0.0;
        last_log = now;
        tokens_since_log = 0;
        const json line{{"step", r.step}, {"loss", r.loss}, {"bpc", r.bpc}, {"lr", r.lr},
                        {"tokens_per_s", tps}};
        metrics << line.dump() << "\n";
        metrics.flush();
        std::cerr << "step " << r.step << " loss " << r.loss << " bpc " << r.bpc << "\n";
      },
      [&](const txl::trainer::Trainer& t, std::int64_t step) {
        if (step >= tc.steps) {
          save_with_vocab(t, out_dir + "/model.bin");
        } else {
          save_with_vocab(t, out_dir + "/ckpt-" + std::to_string(step) + ".bin");
        }
      });
  if (tc.steps == 0) save_with_vocab(trainer, out_dir + "/model.bin");
  std::cerr << "final checkpoint: " << out_dir << "/model.bin\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& split,
             const std::string& splits_text, const std::string& mode, int mem_len, int window,
             bool score_all, int seg_len, const std::string& nll_out,
             const std::string& kernels_name) {
  force_kernels(kernels_name);
  LoadedCheckpoint loaded = load_model_checkpoint(ckpt_path);
  const auto stream =
      load_split_with_vocab(data_path, loaded.vocab, parse_splits(splits_text), split);

  txl::evaluator::EvalResult result;
  if (mode == "xl") {
    const int mem = mem_len >= 0 ? mem_len : loaded.params.config.mem_len_eval;
    const int seg = seg_len >= 1 ? seg_len : loaded.params.config.segment_len;
    result = txl::evaluator::eval_xl(loaded.params, stream, mem, seg);
  } else if (mode == "vanilla") {
    const int w = window >= 1 ? window : loaded.params.config.segment_len;
    if (score_all) {
      // Chunked scoring: independent windows, every position scored; the
      // same computation as memory-reuse evaluation with an empty cache.
      result = txl::evaluator::eval_xl(loaded.params, stream, 0, w);
    } else {
      result = txl::evaluator::eval_vanilla_sliding(loaded.params, stream, w);
    }
  } else {
    throw txl::ConfigError("--mode must be xl or vanilla");
  }

  if (!nll_out.empty()) {
    std::ofstream out(nll_out, std::ios::binary);
    if (!out) throw txl::IoError("cannot write " + nll_out);
    out.write("TXLNLL\0", 8);
    const std::uint64_t count = result.nll.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(result.nll.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
  }

  const json summary{{"bpc", result.bpc}, {"ppl", result.ppl}, {"positions", result.positions}};
  std::cout << summary.dump() << "\n";
  std::cerr << "tokens/s " << result.tokens_per_sec << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& ckpt_path, const std::string& data_path, const std::string& split,
              const std::string& splits_text, const std::string& windows_text, int seg_len,
              std::int64_t xl_tokens, std::int64_t vanilla_tokens, const std::string& json_out,
              const std::string& kernels_name) {
  force_kernels(kernels_name);
  LoadedCheckpoint loaded = load_model_checkpoint(ckpt_path);
  const auto stream =
      load_split_with_vocab(data_path, loaded.vocab, parse_splits(splits_text), split);
  const auto windows = txl::config::parse_int_list(windows_text);
  const int seg = seg_len >= 1 ? seg_len : loaded.params.config.segment_len;

  const auto rows = txl::evaluator::bench_speed(loaded.params, stream, windows, seg, xl_tokens,
                                                vanilla_tokens);
  json report = json::array();
  std::printf("%-10s %-10s %-16s %-10s\n", "regime", "context", "sec/token", "slowdown");
  for (const auto& row : rows) {
    std::printf("%-10s %-10d %-16.9f %-10.2f\n", row.regime.c_str(), row.context,
                row.per_token_seconds, row.slowdown_vs_xl);
    report.push_back({{"regime", row.regime},
                      {"context", row.context},
                      {"per_token_seconds", row.per_token_seconds},
                      {"slowdown_vs_xl", row.slowdown_vs_xl}});
  }
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    out << report.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_export_losses(const std::string& ckpt_path, const std::string& data_path,
                      const std::string& split, const std::string& splits_text,
                      const std::string& contexts_text, const std::string& out_path,
                      std::string model_id, std::int64_t max_positions,
                      const std::string& kernels_name) {
  force_kernels(kernels_name);
  LoadedCheckpoint loaded = load_model_checkpoint(ckpt_path);
  auto stream = load_split_with_vocab(data_path, loaded.vocab, parse_splits(splits_text), split);
  const auto contexts = txl::config::parse_int_list(contexts_text);
  if (max_positions > 0) {
    const std::int64_t keep = contexts.back() + max_positions;
    if (static_cast<std::int64_t>(stream.size()) > keep) stream.resize(keep);
  }
  if (model_id.empty()) model_id = std::filesystem::path(ckpt_path).stem().string();
  const auto table = txl::evaluator::export_losses(loaded.params, stream, contexts, model_id);
  txl::evaluator::save_loss_table(out_path, table);
  const json summary{{"model", table.model_id},
                     {"contexts", table.contexts},
                     {"positions", table.count},
                     {"out", out_path}};
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_recl(const std::string& tables_text, const std::string& model_id, double r, int delta,
             int initial_c, double threshold, int max_c, const std::string& out_path) {
  txl::recl::ModelGroup group;
  std::istringstream in(tables_text);
  std::string path;
  while (std::getline(in, path, ',')) {
    if (!path.empty()) group.tables.push_back(txl::evaluator::load_loss_table(path));
  }
  group.validate();

  txl::recl::ReclConfig config;
  config.r = r;
  config.delta = delta > 0 ? delta : group.contexts().front();
  config.initial_c = initial_c > 0 ? initial_c : group.contexts().front();
  config.threshold = threshold;
  config.max_c = max_c;

  json results = json::array();
  if (!model_id.empty()) {
    const auto result = txl::recl::recl_search(group, group.model_index(model_id), config);
    results.push_back(txl::recl::result_to_json(result, config));
  } else {
    for (std::size_t i = 0; i < group.tables.size(); ++i) {
      const auto result = txl::recl::recl_search(group, static_cast<int>(i), config);
      results.push_back(txl::recl::result_to_json(result, config));
    }
  }
  json report{{"models", json::array()}, {"results", results}};
  for (const auto& table : group.tables) report["models"].push_back(table.model_id);
  std::cout << report.dump() << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_generate(const std::string& ckpt_path, const std::string& seed_text,
                 const std::string& seed_file, int n_tokens, int top_k, double temperature,
                 std::int64_t seed, int mem_len, const std::string& out_path,
                 const std::string& kernels_name) {
  force_kernels(kernels_name);
  LoadedCheckpoint loaded = load_model_checkpoint(ckpt_path);

  std::string text = seed_text;
  if (!seed_file.empty()) {
    if (seed_file == "-") {
      text.assign((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    } else {
      std::ifstream in(seed_file, std::ios::binary);
      if (!in) throw txl::IoError("cannot open seed file " + seed_file);
      text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
  }
  if (text.empty()) throw txl::ConfigError("generate needs --seed-text or --seed-file");

  const auto seed_tokens = loaded.vocab.encode(text);
  txl::sampler::GenerateOptions opt;
  opt.top_k = top_k;
  opt.temperature = temperature;
  opt.seed = static_cast<std::uint64_t>(seed);
  opt.mem_len = mem_len;
  const auto result = txl::sampler::generate(loaded.params, seed_tokens, n_tokens, opt);
  if (result.top_k_clamped) {
    std::cerr << "warning: top_k exceeded the vocabulary size and was clamped\n";
  }

  const std::string decoded = loaded.vocab.decode(result.tokens);
  if (out_path.empty()) {
    std::cout << decoded << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary);
    out << decoded;
  }
  return kExitOk;
}

int cmd_make_lag(int vocab, std::int64_t length, std::int64_t lag, std::int64_t seed,
                 const std::string& out_path) {
  static const char alphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+/";
  if (vocab < 1 || vocab > 64) {
    throw txl::ConfigError("make-lag vocab must be between 1 and 64 (written as text symbols)");
  }
  const auto stream = txl::corpus::make_synthetic_lag_corpus(vocab, length, lag,
                                                             static_cast<std::uint64_t>(seed));
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw txl::IoError("cannot write " + out_path);
  for (std::int32_t token : stream) out.put(alphabet[token]);
  std::cerr << "wrote " << length << " tokens (lag " << lag << ", vocab " << vocab << ") to "
            << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segment-recurrence language model toolkit"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_data, train_out = "run", train_resume, train_kernels;
  std::int64_t train_steps = -1, train_seed = -1;
  train->add_option("--config", train_config, "flat key = value config file")->required();
  train->add_option("--data", train_data, "override the config's data path");
  train->add_option("--steps", train_steps, "override the step count");
  train->add_option("--seed", train_seed, "override model and trainer seeds");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option("--kernels", train_kernels, "force kernel backend (scalar/avx2/neon)");

  // eval
  auto* eval = app.add_subcommand("eval", "bpc/perplexity of a checkpoint on a data split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_splits, eval_mode = "xl";
  std::string eval_nll_out, eval_kernels;
  int eval_mem_len = -1, eval_window = -1, eval_seg_len = -1;
  bool eval_score_all = false;
  std::int64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--split", eval_split, "train|valid|test (default test)");
  eval->add_option("--splits", eval_splits, "three split fractions, default 0.8,0.1,0.1");
  eval->add_option("--mode", eval_mode, "xl (memory reuse) or vanilla (sliding window)");
  eval->add_option("--mem-len", eval_mem_len, "cache length for xl mode");
  eval->add_option("--window", eval_window, "window for vanilla mode");
  eval->add_flag("--score-all", eval_score_all, "vanilla: score every position per chunk");
  eval->add_option("--seg-len", eval_seg_len, "segment length for xl mode");
  eval->add_option("--nll-out", eval_nll_out, "write per-token nll (binary)");
  eval->add_option("--seed", eval_seed, "accepted for interface uniformity; eval is deterministic");
  eval->add_option("--kernels", eval_kernels, "force kernel backend");

  // bench
  auto* bench = app.add_subcommand("bench", "per-token speed of both evaluation regimes");
  std::string bench_ckpt, bench_data, bench_split = "test", bench_splits, bench_windows;
  std::string bench_json, bench_kernels;
  int bench_seg_len = -1;
  std::int64_t bench_xl_tokens = 2048, bench_vanilla_tokens = 128;
  bench->add_option("--checkpoint", bench_ckpt)->required();
  bench->add_option("--data", bench_data)->required();
  bench->add_option("--split", bench_split);
  bench->add_option("--splits", bench_splits);
  bench->add_option("--windows", bench_windows, "context lengths, e.g. 32,64,128")->required();
  bench->add_option("--seg-len", bench_seg_len);
  bench->add_option("--xl-tokens", bench_xl_tokens, "positions timed in xl mode");
  bench->add_option("--vanilla-tokens", bench_vanilla_tokens, "positions timed in sliding mode");
  bench->add_option("--json", bench_json, "write rows as JSON");
  bench->add_option("--kernels", bench_kernels);

  // export-losses
  auto* export_losses = app.add_subcommand("export-losses", "per-token loss table for RECL");
  std::string el_ckpt, el_data, el_split = "test", el_splits, el_contexts, el_out, el_model_id;
  std::string el_kernels;
  std::int64_t el_max_positions = 0;
  export_losses->add_option("--checkpoint", el_ckpt)->required();
  export_losses->add_option("--data", el_data)->required();
  export_losses->add_option("--split", el_split);
  export_losses->add_option("--splits", el_splits);
  export_losses->add_option("--contexts", el_contexts, "ascending context lengths")->required();
  export_losses->add_option("--out", el_out)->required();
  export_losses->add_option("--model-id", el_model_id, "defaults to the checkpoint stem");
  export_losses->add_option("--max-positions", el_max_positions, "cap scored positions");
  export_losses->add_option("--kernels", el_kernels);

  // recl
  auto* recl = app.add_subcommand("recl", "relative effective context length over loss tables");
  std::string recl_tables, recl_model, recl_out;
  double recl_r = 0.1, recl_threshold = 0.01;
  int recl_delta = 0, recl_initial = 0, recl_max_c = 0;
  recl->add_option("--tables", recl_tables, "comma-separated loss table files")->required();
  recl->add_option("--model", recl_model, "model id (default: all in the group)");
  recl->add_option("--r", recl_r, "top fraction of hard positions");
  recl->add_option("--delta", recl_delta, "context step (default: smallest context)");
  recl->add_option("--initial-c", recl_initial, "starting context (default: smallest context)");
  recl->add_option("--threshold", recl_threshold, "gain threshold (strict)");
  recl->add_option("--max-c", recl_max_c, "stop at this context (default: largest in tables)");
  recl->add_option("--out", recl_out, "also write the report here");

  // generate
  auto* generate = app.add_subcommand("generate", "sample text from a checkpoint");
  std::string gen_ckpt, gen_seed_text, gen_seed_file, gen_out, gen_kernels;
  int gen_n_tokens = 100, gen_top_k = 40, gen_mem_len = -1;
  double gen_temperature = 1.0;
  std::int64_t gen_seed = 0;
  generate->add_option("--checkpoint", gen_ckpt)->required();
  generate->add_option("--seed-text", gen_seed_text, "seed text inline");
  generate->add_option("--seed-file", gen_seed_file, "seed text file, - for stdin");
  generate->add_option("--n-tokens", gen_n_tokens);
  generate->add_option("--top-k", gen_top_k);
  generate->add_option("--temperature", gen_temperature);
  generate->add_option("--seed", gen_seed, "rng seed");
  generate->add_option("--mem-len", gen_mem_len, "cache length during decoding");
  generate->add_option("--out", gen_out, "write the sample here instead of stdout");
  generate->add_option("--kernels", gen_kernels);

  // make-lag
  auto* make_lag = app.add_subcommand("make-lag", "write a synthetic lagged-copy text corpus");
  int lag_vocab = 16;
  std::int64_t lag_length = 200000, lag_lag = 48, lag_seed = 1;
  std::string lag_out;
  make_lag->add_option("--vocab", lag_vocab);
  make_lag->add_option("--length", lag_length);
  make_lag->add_option("--lag", lag_lag);
  make_lag->add_option("--seed", lag_seed);
  make_lag->add_option("--out", lag_out)->required();

  // kernels
  auto* kernels_cmd = app.add_subcommand("kernels", "list kernel backends");

  try {
    app.parse(argc, argv);
    if (train->parsed()) {
      return cmd_train(train_config, train_data, train_steps, train_seed, train_out, train_resume,
                       train_kernels);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_data, eval_split, eval_splits, eval_mode, eval_mem_len,
                      eval_window, eval_score_all, eval_seg_len, eval_nll_out, eval_kernels);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_ckpt, bench_data, bench_split, bench_splits, bench_windows,
                       bench_seg_len, bench_xl_tokens, bench_vanilla_tokens, bench_json,
                       bench_kernels);
    }
    if (export_losses->parsed()) {
      return cmd_export_losses(el_ckpt, el_data, el_split, el_splits, el_contexts, el_out,
                               el_model_id, el_max_positions, el_kernels);
    }
    if (recl->parsed()) {
      return cmd_recl(recl_tables, recl_model, recl_r, recl_delta, recl_initial, recl_threshold,
                      recl_max_c, recl_out);
    }
    if (generate->parsed()) {
      return cmd_generate(gen_ckpt, gen_seed_text, gen_seed_file, gen_n_tokens, gen_top_k,
                          gen_temperature, gen_seed, gen_mem_len, gen_out, gen_kernels);
    }
    if (make_lag->parsed()) {
      return cmd_make_lag(lag_vocab, lag_length, lag_lag, lag_seed, lag_out);
    }
    if (kernels_cmd->parsed()) {
      for (const auto& name : txl::kernels::available()) {
        std::cout << name << (txl::kernels::active().name == name ? " (active)" : "") << "\n";
      }
      return kExitOk;
    }
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const txl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const txl::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
