#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace jem::io {

struct SerializeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Explicit little-endian encoding, independent of host byte order.

inline void put_u32(std::ostream& s, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                          (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
    s.write(reinterpret_cast<char*>(b), 4);
}

inline void put_u64(std::ostream& s, std::uint64_t v) {
    put_u32(s, std::uint32_t(v));
    put_u32(s, std::uint32_t(v >> 32));
}

inline void put_i32(std::ostream& s, std::int32_t v) {
    put_u32(s, std::uint32_t(v));
}
inline void put_i64(std::ostream& s, std::int64_t v) {
    put_u64(s, std::uint64_t(v));
}

inline void put_f64(std::ostream& s, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(s, u);
}

inline std::uint32_t get_u32(std::istream& s) {
    unsigned char b[4];
    if (!s.read(reinterpret_cast<char*>(b), 4))
        throw SerializeError("truncated stream");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& s) {
    std::uint64_t lo = get_u32(s);
    std::uint64_t hi = get_u32(s);
    return lo | (hi << 32);
}

inline std::int32_t get_i32(std::istream& s) { return std::int32_t(get_u32(s)); }
inline std::int64_t get_i64(std::istream& s) { return std::int64_t(get_u64(s)); }

inline double get_f64(std::istream& s) {
    std::uint64_t u = get_u64(s);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace jem::io
