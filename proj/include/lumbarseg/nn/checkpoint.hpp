#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "lumbarseg/nn/model.hpp"

namespace lseg::nn {

// Binary model block: magic, format version, layer-spec table, then each
// tensor as shape extents + little-endian 64-bit floats. Higher-level
// checkpoints embed this block and append their own sections.
void write_model(std::ostream& out, const ModelParams& p);
ModelParams read_model(std::istream& in);

void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Replaces model's tensors with the file's; the layer-spec tables must agree.
void load_checkpoint_into(ModelParams& model, const std::string& path);

namespace bin {
void write_bytes(std::ostream& out, const void* p, size_t n);
void read_bytes(std::istream& in, void* p, size_t n);
void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_i64(std::ostream& out, int64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
int64_t read_i64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
}  // namespace bin

}  // namespace lseg::nn
