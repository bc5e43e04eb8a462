#include "txl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "txl/errors.hpp"

namespace txl::checkpoint {

namespace {

constexpr char kMagic[8] = {'T', 'X', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

void read_doubles(std::istream& in, std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double& v : values) v = std::bit_cast<double>(read_u64(in));
  }
}

void write_tensor_list(std::ostream& out, const std::vector<std::pair<std::string, Tensor>>& tensors) {
  write_u64(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    write_string(out, name);
    out.put(static_cast<char>(kDtypeF64));
    write_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (int extent : tensor.shape) write_u64(out, static_cast<std::uint64_t>(extent));
    write_doubles(out, *tensor.data);
  }
}

std::vector<std::pair<std::string, Tensor>> read_tensor_list(std::istream& in) {
  const std::uint64_t count = read_u64(in);
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const int dtype = in.get();
    if (dtype != kDtypeF64) throw IoError("checkpoint: unsupported dtype for " + name);
    const std::uint32_t ndim = read_u32(in);
    std::vector<int> shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u64(in));
    Tensor t = Tensor::zeros(shape);
    read_doubles(in, *t.data);
    if (!in) throw IoError("checkpoint: truncated tensor data for " + name);
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor* Checkpoint::find_aux(const std::string& name) const {
  for (const auto& [n, t] : aux_tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_string(out, ckpt.config.dump());
  write_tensor_list(out, ckpt.tensors);
  const bool has_aux = !ckpt.aux.is_null() || !ckpt.aux_tensors.empty();
  out.put(has_aux ? 1 : 0);
  if (has_aux) {
    write_string(out, ckpt.aux.dump());
    write_tensor_list(out, ckpt.aux_tensors);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = nlohmann::json::parse(read_string(in));
  ckpt.tensors = read_tensor_list(in);
  const int has_aux = in.get();
  if (has_aux == 1) {
    ckpt.aux = nlohmann::json::parse(read_string(in));
    ckpt.aux_tensors = read_tensor_list(in);
  }
  if (!in) throw IoError("checkpoint: truncated file " + path);
  return ckpt;
}

nlohmann::json config_to_json(const model::ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size},
                        {"n_layers", c.n_layers},
                        {"d_model", c.d_model},
                        {"n_heads", c.n_heads},
                        {"d_head", c.d_head},
                        {"d_ff", c.d_ff},
                        {"segment_len", c.segment_len},
                        {"mem_len_train", c.mem_len_train},
                        {"mem_len_eval", c.mem_len_eval},
                        {"encoding", model::encoding_name(c.encoding)},
                        {"recurrence", c.recurrence},
                        {"loss_mode", model::loss_mode_name(c.loss_mode)},
                        {"dropout", c.dropout},
                        {"tie_embeddings", c.tie_embeddings},
                        {"seed", c.seed}};
}

model::ModelConfig config_from_json(const nlohmann::json& j) {
  model::ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_head = j.at("d_head").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.segment_len = j.at("segment_len").get<int>();
  c.mem_len_train = j.at("mem_len_train").get<int>();
  c.mem_len_eval = j.at("mem_len_eval").get<int>();
  c.encoding = model::encoding_from_name(j.at("encoding").get<std::string>());
  c.recurrence = j.at("recurrence").get<bool>();
  c.loss_mode = model::loss_mode_from_name(j.at("loss_mode").get<std::string>());
  c.dropout = j.at("dropout").get<double>();
  c.tie_embeddings = j.at("tie_embeddings").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Checkpoint from_model(const model::ModelParams& params) {
  Checkpoint ckpt;
  ckpt.config = config_to_json(params.config);
  for (const auto& [name, tensor] : params.named_tensors()) {
    ckpt.tensors.emplace_back(name, tensor->detached_copy());
  }
  return ckpt;
}

model::ModelParams to_model(const Checkpoint& ckpt) {
  model::ModelConfig config = config_from_json(ckpt.config);
  model::ModelParams params = model::init_model(config);
  for (auto& [name, tensor] : params.named_tensors()) {
    const Tensor* stored = ckpt.find(name);
    if (stored == nullptr) throw IoError("checkpoint: missing tensor " + name);
    if (stored->shape != tensor->shape) throw IoError("checkpoint: shape mismatch for " + name);
    std::copy(stored->data->begin(), stored->data->end(), tensor->data->begin());
  }
  return params;
}

}  // namespace txl::checkpoint
