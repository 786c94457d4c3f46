#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace dt {

inline constexpr unsigned kDefaultPasswordIterations = 100000;

/// Salted, iterated one-way digest:
/// "pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>".
std::string hash_password(std::string_view password, unsigned iterations = kDefaultPasswordIterations);
/// Constant-time comparison against a digest produced by hash_password.
bool verify_password(std::string_view password, std::string_view digest);

/// `bytes` bytes from the system CSPRNG, hex-encoded.
std::string random_hex(std::size_t bytes);

std::string hmac_sha256_hex(std::string_view key, std::string_view message);
bool constant_time_equal(std::string_view a, std::string_view b) noexcept;

std::string to_hex(std::string_view bytes);
std::string base64url_encode(std::string_view bytes);
/// Returns false on malformed input.
bool base64url_decode(std::string_view text, std::string& out);

}  // namespace dt
