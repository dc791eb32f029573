#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chronoeval::hash {

// SHA-256 hex digest. Used both as the request-cache key and for the
// input/config digests recorded in run manifests.
inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len,
                   EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256_hex: EVP_Digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

// First 8 bytes of the SHA-256 digest as an integer. Handy for seeding
// named RNG substreams.
inline std::uint64_t sha256_prefix64(std::string_view data) {
    const std::string hex = sha256_hex(data);
    std::uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[static_cast<std::size_t>(i)];
        v = (v << 4) | static_cast<std::uint64_t>(
                           c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return v;
}

}  // namespace chronoeval::hash
