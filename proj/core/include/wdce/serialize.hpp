#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "wdce/tensor.hpp"

namespace wdce {

/// Thrown when a binary file does not parse; `offset` is the byte position
/// of the first bad read.
struct FormatError : std::runtime_error {
    FormatError(const std::string& what, std::uint64_t offset);
    std::uint64_t offset;
};

// Single-tensor dump: magic "WDCT", u32 rank, u64 extents, f64 payload,
// everything little-endian, payload row-major.
void write_tensor(std::ostream& out, const Tensor& t);
TensorPtr read_tensor(std::istream& in, std::uint64_t base_offset = 0);

void save_tensor(const std::string& path, const Tensor& t);
TensorPtr load_tensor(const std::string& path);

// Low-level little-endian helpers shared by the container formats.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in, std::uint64_t offset);
std::uint64_t read_u64(std::istream& in, std::uint64_t offset);
double read_f64(std::istream& in, std::uint64_t offset);
void read_bytes(std::istream& in, char* dst, std::size_t n, std::uint64_t offset);

}  // namespace wdce
