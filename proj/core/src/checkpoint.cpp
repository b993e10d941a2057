#include <bit>
#include <cstring>
#include <fstream>

#include "stance/csv.hpp"
#include "stance/error.hpp"
#include "stance/model.hpp"

namespace stance {

namespace {

constexpr std::string_view kMagic = "STNCCKPT";

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw DataError("checkpoint is truncated");
    }
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParameters& params) {
  Writer w;
  w.bytes(kMagic);
  w.u8(kCheckpointVersion);
  const ModelConfig& c = params.config;
  w.u64(c.num_layers);
  w.u64(c.hidden_dim);
  w.u64(c.num_heads);
  w.u64(c.ffn_dim);
  w.u64(c.vocab_size);
  w.u64(c.max_positions);
  w.u64(c.num_classes);
  w.f64(c.dropout_rate);
  w.u64(c.seed);
  w.u64(params.tensors.size());
  for (const auto& t : params.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u64(t.rows);
    w.u64(t.cols);
    w.u8(t.decays ? 1 : 0);
    for (double v : t.values) {
      w.f64(v);
    }
  }
  return w.take();
}

ModelParameters deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.num_layers = r.u64();
  c.hidden_dim = r.u64();
  c.num_heads = r.u64();
  c.ffn_dim = r.u64();
  c.vocab_size = r.u64();
  c.max_positions = r.u64();
  c.num_classes = r.u64();
  c.dropout_rate = r.f64();
  c.seed = r.u64();

  ModelParameters params = ModelParameters::zeros(c);
  const std::uint64_t count = r.u64();
  if (count != params.tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                    std::to_string(params.tensors.size()));
  }
  for (auto& t : params.tensors) {
    const std::uint32_t name_len = r.u32();
    const std::string_view name = r.bytes(name_len);
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    const bool decays = r.u8() != 0;
    if (name != t.name || rows != t.rows || cols != t.cols || decays != t.decays) {
      throw DataError("checkpoint tensor \"" + std::string(name) + "\" does not match expected \"" + t.name + "\"");
    }
    for (auto& v : t.values) {
      v = r.f64();
    }
  }
  if (!r.done()) {
    throw DataError("checkpoint has trailing bytes");
  }
  return params;
}

void save_checkpoint(const ModelParameters& params, const std::string& path) {
  const std::string bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw IoError("failed writing checkpoint '" + path + "'");
  }
}

ModelParameters load_checkpoint(const std::string& path) { return deserialize_checkpoint(csv::read_file(path)); }

}  // namespace stance
