#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bspa {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws ValidationError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace bspa
