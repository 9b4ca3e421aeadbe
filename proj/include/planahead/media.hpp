#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace planahead {

// Raw image bytes plus their media type. Never resized or re-encoded.
struct ImagePart {
  std::vector<std::uint8_t> bytes;
  std::string media_type = "image/png";

  bool empty() const { return bytes.empty(); }
  friend bool operator==(const ImagePart&, const ImagePart&) = default;
};

}  // namespace planahead
