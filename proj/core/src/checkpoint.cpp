#include "edac/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "edac/error.hpp"

namespace edac {

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'D', 'A', 'C', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const char> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void f64s(std::span<const double> values) {
    u64(values.size());
    for (double v : values) f64(v);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t expected) {
    const std::uint64_t n = u64();
    if (n != expected) {
      throw CheckpointError("checkpoint vector length " + std::to_string(n) + " does not match expected " +
                            std::to_string(expected));
    }
    std::vector<double> out(n);
    for (double& v : out) v = f64();
    return out;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_metrics(Writer& w, const MetricsRecord& m) {
  w.u64(m.epoch);
  for (double v : {m.clean_acc_train, m.clean_acc_test, m.robust_acc_train, m.robust_acc_test, m.ac_train, m.ac_test,
                   m.lr}) {
    w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(m.method));
}

MetricsRecord read_metrics(Reader& r) {
  MetricsRecord m;
  m.epoch = r.u64();
  m.clean_acc_train = r.f64();
  m.clean_acc_test = r.f64();
  m.robust_acc_train = r.f64();
  m.robust_acc_test = r.f64();
  m.ac_train = r.f64();
  m.ac_test = r.f64();
  m.lr = r.f64();
  const std::uint32_t method = r.u32();
  if (method > static_cast<std::uint32_t>(Method::kEdacReg)) throw CheckpointError("checkpoint has unknown method tag");
  m.method = static_cast<Method>(method);
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.model.validate();
  Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(0);
  const ModelSpec& spec = ckpt.model.spec;
  w.u64(spec.input_dim);
  w.u32(static_cast<std::uint32_t>(spec.activation));
  w.u32(static_cast<std::uint32_t>(spec.num_layers()));
  for (std::size_t width : spec.layer_widths) w.u64(width);
  w.u64(spec.init_seed);
  w.u64(ckpt.epoch);
  w.u64(ckpt.rng.seed);
  w.u64(ckpt.rng.next_epoch);
  w.f64s(ckpt.model.params.flatten());
  if (ckpt.optimizer_momentum.num_segments() == 0) {
    w.f64s({});
  } else {
    if (!ckpt.optimizer_momentum.same_layout(ckpt.model.params)) {
      throw CheckpointError("momentum buffer layout does not match the model");
    }
    w.f64s(ckpt.optimizer_momentum.flatten());
  }
  write_metrics(w, ckpt.metrics);
  const std::uint64_t sum = fnv1a(w.buffer());
  w.u64(sum);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError("not a checkpoint file");
  }
  if (bytes.size() < kMagic.size() + 8) throw CheckpointError("checkpoint too short");
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.subspan(body));
  if (tail.u64() != fnv1a(bytes.first(body))) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(bytes.first(body));
  r.take(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  r.u32();

  Checkpoint ckpt;
  ModelSpec& spec = ckpt.model.spec;
  spec.input_dim = r.u64();
  const std::uint32_t act = r.u32();
  if (act > 1) throw CheckpointError("checkpoint has unknown activation tag");
  spec.activation = static_cast<Activation>(act);
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 4096) throw CheckpointError("checkpoint has an implausible layer count");
  for (std::uint32_t i = 0; i < layers; ++i) spec.layer_widths.push_back(r.u64());
  spec.init_seed = r.u64();
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint model spec is invalid: ") + e.what());
  }
  ckpt.epoch = r.u64();
  ckpt.rng.seed = r.u64();
  ckpt.rng.next_epoch = r.u64();
  const ParamVector layout = ParamVector::zeros(spec);
  ckpt.model.params = ParamVector::unflatten(layout, r.f64s(layout.size()));
  const std::uint64_t momentum_len = r.u64();
  if (momentum_len == layout.size()) {
    std::vector<double> flat(momentum_len);
    for (double& v : flat) v = r.f64();
    ckpt.optimizer_momentum = ParamVector::unflatten(layout, flat);
  } else if (momentum_len == 0) {
    ckpt.optimizer_momentum = layout;
  } else {
    throw CheckpointError("checkpoint momentum length does not match the model");
  }
  ckpt.metrics = read_metrics(r);
  if (r.pos() != body) throw CheckpointError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace edac
