#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace planahead {

// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

std::string base64_encode(std::span<const std::uint8_t> data);

// Throws ValidationError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace planahead
