#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ttc::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws SchemaError on invalid characters or length.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// LSB-first within each byte.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

}  // namespace ttc::codec
