// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hlik/errors.hpp"
#include "hlik/fista/io.hpp"

namespace hlik::fista {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', 'A'};
// Guards against absurd sizes from corrupted headers before allocating.
constexpr uint32_t kMaxWidth = 1u << 16;
constexpr uint32_t kMaxLayers = 64;

class Writer {
 public:
  template <typename T>
  void uint(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { uint(std::bit_cast<uint64_t>(v)); }
  void raw(const char* p, size_t n) { out_.append(p, n); }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(uint<uint64_t>(what)); }
  void need(size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("model file truncated while reading ") + what);
    }
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::string& in_;
  size_t pos_ = 0;
};

template <typename V>
void write_vec(Writer& w, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

template <typename V>
void read_vec(Reader& r, V& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64(what);
}

std::vector<int> read_widths(Reader& r, const char* what) {
  const uint32_t n = r.uint<uint32_t>(what);
  if (n > kMaxLayers) throw FormatError(std::string("implausible layer count in ") + what);
  std::vector<int> out(n);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t v = r.uint<uint32_t>(what);
    if (v > kMaxWidth) throw FormatError(std::string("implausible width in ") + what);
    out[i] = static_cast<int>(v);
  }
  return out;
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t size) {
  uint64_t h = 0xcbf29ce484222325ull;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string serialize(const Model& m) {
  const ModelConfig& c = m.config;
  const ParamLayout layout(c);
  if (m.params.size() != layout.size()) throw DimensionMismatch("parameter vector does not match config");

  Writer w;
  w.raw(kMagic, 4);
  w.uint<uint16_t>(kFormatVersion);
  w.uint<uint8_t>(static_cast<uint8_t>(c.arch));
  w.uint<uint8_t>(static_cast<uint8_t>(c.ablate));
  for (int v : {c.history, c.embed, c.gru_hidden, c.attn_dim, c.film_hidden}) w.uint<uint32_t>(static_cast<uint32_t>(v));
  for (const auto* widths : {&c.head_hidden, &c.mlp_hidden}) {
    w.uint<uint32_t>(static_cast<uint32_t>(widths->size()));
    for (int v : *widths) w.uint<uint32_t>(static_cast<uint32_t>(v));
  }
  const Normalizer& n = m.normalizer;
  write_vec(w, n.frame_mean);
  write_vec(w, n.frame_std);
  write_vec(w, n.target_mean);
  write_vec(w, n.target_std);
  write_vec(w, n.label_mean);
  write_vec(w, n.label_std);
  w.uint<uint64_t>(static_cast<uint64_t>(m.params.size()));
  write_vec(w, m.params);
  w.uint<uint64_t>(fnv1a64(w.bytes().data(), w.bytes().size()));
  return w.bytes();
}

Model deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
  for (int i = 0; i < 4; ++i) r.uint<uint8_t>("magic");
  const uint16_t version = r.uint<uint16_t>("version");
  if (version != kFormatVersion) {
    throw VersionMismatch("model format version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }

  Model m;
  ModelConfig& c = m.config;
  const uint8_t arch = r.uint<uint8_t>("architecture");
  const uint8_t ablate = r.uint<uint8_t>("ablation");
  if (arch > 1) throw FormatError("unknown architecture code " + std::to_string(arch));
  if (ablate > 3) throw FormatError("unknown ablation code " + std::to_string(ablate));
  c.arch = static_cast<Architecture>(arch);
  c.ablate = static_cast<Ablation>(ablate);
  for (int* v : {&c.history, &c.embed, &c.gru_hidden, &c.attn_dim, &c.film_hidden}) {
    const uint32_t x = r.uint<uint32_t>("config");
    if (x > kMaxWidth) throw FormatError("implausible config value " + std::to_string(x));
    *v = static_cast<int>(x);
  }
  c.head_hidden = read_widths(r, "head widths");
  c.mlp_hidden = read_widths(r, "MLP widths");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid config block: ") + e.what());
  }

  Normalizer& n = m.normalizer;
  read_vec(r, n.frame_mean, "normalizer");
  read_vec(r, n.frame_std, "normalizer");
  read_vec(r, n.target_mean, "normalizer");
  read_vec(r, n.target_std, "normalizer");
  read_vec(r, n.label_mean, "normalizer");
  read_vec(r, n.label_std, "normalizer");

  const uint64_t count = r.uint<uint64_t>("parameter count");
  const ParamLayout layout(c);
  if (count != static_cast<uint64_t>(layout.size())) {
    throw FormatError("parameter count " + std::to_string(count) + " does not match config (" +
                      std::to_string(layout.size()) + ")");
  }
  r.need(count * 8 + 8, "parameters");
  m.params.resize(static_cast<Eigen::Index>(count));
  read_vec(r, m.params, "parameters");

  const size_t body = r.pos();
  const uint64_t stored = r.uint<uint64_t>("checksum");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checksum");
  if (stored != fnv1a64(bytes.data(), body)) throw FormatError("checksum mismatch");
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  const std::string bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace hlik::fista
