#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace drift {

/// Incremental SHA-256 (OpenSSL EVP backed).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::byte> bytes);
    Sha256& update(std::string_view text);
    Sha256& update(const Eigen::MatrixXd& m);  // shape then raw doubles
    template <typename T>
    Sha256& update_pod(const T& v) {
        return update(std::as_bytes(std::span<const T>(&v, 1)));
    }

    std::string hex_digest();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a; stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string base64_encode(std::span<const std::byte> bytes);

}  // namespace drift
