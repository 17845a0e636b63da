#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace rim {

/// Shortest-safe decimal form of a double: 17 significant digits round
/// trip every finite value exactly, so written artifacts replay
/// byte-identically.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// FNV-1a 64-bit hash; used to fingerprint canonical config text.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Hash rendered as a fixed-width hex literal for JSON-safe storage.
inline std::string hash_to_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "0x%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_from_hex(const std::string& text);

} // namespace rim
