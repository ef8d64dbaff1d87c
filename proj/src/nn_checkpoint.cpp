#include <cstring>
#include <fstream>

#include "lumbarseg/nn/checkpoint.hpp"

namespace lseg::nn {

namespace bin {

void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), std::streamsize(n));
}

void read_bytes(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), std::streamsize(n));
  require(in.good(), "checkpoint: truncated or unreadable file");
}

// This codebase targets little-endian hosts only; raw byte copies of the
// native representation are the on-disk format.
void write_u32(std::ostream& out, uint32_t v) { write_bytes(out, &v, 4); }
void write_u64(std::ostream& out, uint64_t v) { write_bytes(out, &v, 8); }
void write_i64(std::ostream& out, int64_t v) { write_bytes(out, &v, 8); }
void write_f64(std::ostream& out, double v) { write_bytes(out, &v, 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  write_bytes(out, s.data(), s.size());
}

uint32_t read_u32(std::istream& in) {
  uint32_t v;
  read_bytes(in, &v, 4);
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v;
  read_bytes(in, &v, 8);
  return v;
}
int64_t read_i64(std::istream& in) {
  int64_t v;
  read_bytes(in, &v, 8);
  return v;
}
double read_f64(std::istream& in) {
  double v;
  read_bytes(in, &v, 8);
  return v;
}
std::string read_string(std::istream& in) {
  uint64_t n = read_u64(in);
  require(n < (1ull << 20), "checkpoint: implausible string length");
  std::string s(n, '\0');
  read_bytes(in, s.data(), n);
  return s;
}

}  // namespace bin

namespace {

constexpr char kMagic[8] = {'L', 'S', 'E', 'G', 'M', 'D', 'L', '\n'};
constexpr uint32_t kVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t) {
  bin::write_u32(out, uint32_t(t.shape.size()));
  for (int e : t.shape) bin::write_i64(out, e);
  bin::write_bytes(out, t.data.data(), t.data.size() * sizeof(double));
}

Tensor read_tensor(std::istream& in) {
  uint32_t nd = bin::read_u32(in);
  require(nd <= 8, "checkpoint: implausible tensor rank");
  if (nd == 0) return Tensor{};
  std::vector<int> shape(nd);
  for (auto& e : shape) {
    int64_t v = bin::read_i64(in);
    require(v >= 1 && v <= (1 << 28), "checkpoint: implausible tensor extent");
    e = int(v);
  }
  Tensor t = Tensor::zeros(shape);
  bin::read_bytes(in, t.data.data(), t.data.size() * sizeof(double));
  return t;
}

}  // namespace

void write_model(std::ostream& out, const ModelParams& p) {
  bin::write_bytes(out, kMagic, 8);
  bin::write_u32(out, kVersion);
  bin::write_u64(out, p.seed);
  bin::write_i64(out, p.epochs);
  bin::write_u32(out, uint32_t(p.specs.size()));
  for (const LayerSpec& s : p.specs) {
    bin::write_u32(out, uint32_t(s.kind));
    bin::write_i64(out, s.in);
    bin::write_i64(out, s.out);
    bin::write_i64(out, s.k);
    bin::write_i64(out, s.pad);
    bin::write_i64(out, s.skip_id);
  }
  for (size_t i = 0; i < p.specs.size(); ++i) {
    write_tensor(out, p.weights[i]);
    write_tensor(out, p.biases[i]);
  }
}

ModelParams read_model(std::istream& in) {
  char magic[8];
  bin::read_bytes(in, magic, 8);
  require(std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic, not a model file");
  uint32_t version = bin::read_u32(in);
  require(version == kVersion, "checkpoint: unsupported format version " +
                                   std::to_string(version));
  ModelParams p;
  p.seed = bin::read_u64(in);
  p.epochs = bin::read_i64(in);
  uint32_t n = bin::read_u32(in);
  require(n >= 1 && n <= 4096, "checkpoint: implausible layer count");
  p.specs.resize(n);
  for (LayerSpec& s : p.specs) {
    uint32_t kind = bin::read_u32(in);
    require(kind >= 1 && kind <= 7, "checkpoint: unknown layer kind");
    s.kind = LayerKind(kind);
    s.in = int(bin::read_i64(in));
    s.out = int(bin::read_i64(in));
    s.k = int(bin::read_i64(in));
    s.pad = int(bin::read_i64(in));
    s.skip_id = int(bin::read_i64(in));
  }
  p.weights.resize(n);
  p.biases.resize(n);
  // Shapes the spec table dictates; a fresh build gives them for free.
  ModelParams expect = build_model(p.specs, 0);
  for (size_t i = 0; i < p.specs.size(); ++i) {
    p.weights[i] = read_tensor(in);
    p.biases[i] = read_tensor(in);
    require(p.weights[i].shape == expect.weights[i].shape &&
                p.biases[i].shape == expect.biases[i].shape,
            "checkpoint: tensor shape does not match layer " + std::to_string(i) + " (" +
                layer_kind_name(p.specs[i].kind) + ")");
  }
  return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot write " + path);
  write_model(out, p);
  require(out.good(), "checkpoint: short write to " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open " + path);
  return read_model(in);
}

void load_checkpoint_into(ModelParams& model, const std::string& path) {
  ModelParams p = load_checkpoint(path);
  require(p.specs == model.specs,
          "checkpoint: layer table in " + path + " does not match the model");
  model = std::move(p);
}

}  // namespace lseg::nn
