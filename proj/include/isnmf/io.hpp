#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "isnmf/matrix.hpp"

namespace isnmf {

// Binary matrix file: magic "ISNM", u32 LE version, u64 LE rows, u64 LE cols,
// then rows*cols IEEE-754 float64 LE in column-major order.

inline constexpr char kMatrixMagic[4] = {'I', 'S', 'N', 'M'};
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

namespace detail {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed");
}

inline void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw TruncatedPayload(std::string("unexpected end of data reading ") + what);
}

template <typename T>
inline void write_le(std::ostream& out, T v) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, buf, sizeof(T));
}

template <typename T>
inline T read_le(std::istream& in, const char* what) {
    unsigned char buf[sizeof(T)];
    read_bytes(in, buf, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

inline void write_f64_block(std::ostream& out, const double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        write_bytes(out, p, n * sizeof(double));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &p[i], sizeof(bits));
            write_le<std::uint64_t>(out, bits);
        }
    }
}

inline void read_f64_block(std::istream& in, double* p, std::size_t n, const char* what) {
    if constexpr (std::endian::native == std::endian::little) {
        read_bytes(in, p, n * sizeof(double), what);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits = read_le<std::uint64_t>(in, what);
            std::memcpy(&p[i], &bits, sizeof(bits));
        }
    }
}

} // namespace detail

inline void save_matrix(std::ostream& out, const Matrix& m) {
    detail::write_bytes(out, kMatrixMagic, 4);
    detail::write_le<std::uint32_t>(out, kMatrixFormatVersion);
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    detail::write_f64_block(out, m.data(), static_cast<std::size_t>(m.size()));
}

inline void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_matrix(out, m);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline Matrix load_matrix(std::istream& in) {
    char magic[4];
    detail::read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kMatrixMagic, 4) != 0) throw BadMagic("not a matrix file");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kMatrixFormatVersion)
        throw BadMagic("unsupported matrix format version " + std::to_string(version));
    const auto rows = detail::read_le<std::uint64_t>(in, "rows");
    const auto cols = detail::read_le<std::uint64_t>(in, "cols");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    detail::read_f64_block(in, m.data(), static_cast<std::size_t>(m.size()), "payload");
    require_nonneg_finite(m, "load_matrix");
    return m;
}

inline Matrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return load_matrix(in);
}

} // namespace isnmf
