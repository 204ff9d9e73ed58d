#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdd {

std::string base64_encode(std::span<const unsigned char> bytes);

// Throws Schema on malformed input.
std::vector<unsigned char> base64_decode(std::string_view text);

// Little-endian IEEE-754 binary32 packing used for logits on the wire.
std::string encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(std::string_view base64_text);

}  // namespace cdd
