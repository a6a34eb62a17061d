#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace rramchar {

// FNV-1a, 64-bit. Used for population digests and bitstream hashes; chosen
// over std::hash for a stable value across platforms and library versions.
struct Fnv64 {
    std::uint64_t h = 1469598103934665603ULL;

    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    }
    void update_u8(std::uint8_t v) { update(&v, 1); }
    void update_u16(std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xFF),
                                   static_cast<std::uint8_t>(v >> 8)};
        update(b, 2);
    }
    void update_u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        update(b, 8);
    }
    void update_double(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        update_u64(bits);
    }
    void update_str(std::string_view s) { update(s.data(), s.size()); }
};

inline std::uint16_t fold16(std::uint64_t h) {
    return static_cast<std::uint16_t>(h ^ (h >> 16) ^ (h >> 32) ^ (h >> 48));
}

}  // namespace rramchar
