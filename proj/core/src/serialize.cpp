#include "wdce/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace wdce {

namespace {

constexpr char kTensorMagic[4] = {'W', 'D', 'C', 'T'};

template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        T out;
        auto* src = reinterpret_cast<const unsigned char*>(&v);
        auto* dst = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
        return out;
    }
}

}  // namespace

FormatError::FormatError(const std::string& what, std::uint64_t off)
    : std::runtime_error(what + " (byte offset " + std::to_string(off) + ")"), offset(off) {}

void write_u32(std::ostream& out, std::uint32_t v) {
    v = byteswap_if_big(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
    v = byteswap_if_big(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_u64(out, bits);
}

void read_bytes(std::istream& in, char* dst, std::size_t n, std::uint64_t offset) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatError("truncated read of " + std::to_string(n) + " bytes", offset);
    }
}

std::uint32_t read_u32(std::istream& in, std::uint64_t offset) {
    std::uint32_t v = 0;
    read_bytes(in, reinterpret_cast<char*>(&v), sizeof(v), offset);
    return byteswap_if_big(v);
}

std::uint64_t read_u64(std::istream& in, std::uint64_t offset) {
    std::uint64_t v = 0;
    read_bytes(in, reinterpret_cast<char*>(&v), sizeof(v), offset);
    return byteswap_if_big(v);
}

double read_f64(std::istream& in, std::uint64_t offset) {
    const std::uint64_t bits = read_u64(in, offset);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kTensorMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) write_u64(out, static_cast<std::uint64_t>(e));
    for (double v : t.data) write_f64(out, v);
}

TensorPtr read_tensor(std::istream& in, std::uint64_t base) {
    char magic[4] = {};
    read_bytes(in, magic, 4, base);
    if (std::memcmp(magic, kTensorMagic, 4) != 0) {
        throw FormatError("bad tensor magic, expected \"WDCT\"", base);
    }
    std::uint64_t off = base + 4;
    const std::uint32_t rank = read_u32(in, off);
    off += 4;
    if (rank > 32) throw FormatError("implausible tensor rank " + std::to_string(rank), base + 4);

    Shape shape(rank);
    std::size_t total = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
        const std::uint64_t e = read_u64(in, off);
        off += 8;
        if (e == 0) throw FormatError("zero extent in tensor header", off - 8);
        shape[a] = static_cast<std::size_t>(e);
        if (total > std::numeric_limits<std::size_t>::max() / shape[a]) {
            throw FormatError("tensor extent overflow", off - 8);
        }
        total *= shape[a];
    }
    if (rank == 0) shape = {1};

    std::vector<double> data(total);
    for (std::size_t i = 0; i < total; ++i) {
        data[i] = read_f64(in, off);
        off += 8;
    }
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_tensor(out, t);
    if (!out) throw std::runtime_error("write failed for " + path);
}

TensorPtr load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_tensor(in);
}

}  // namespace wdce
