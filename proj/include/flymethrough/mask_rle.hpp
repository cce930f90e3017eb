#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "flymethrough/projection.hpp"

namespace flymethrough {

/// Row-major run lengths alternating unset/set, always starting with an
/// unset run (which may be 0). Runs sum to width * height.
std::vector<std::uint32_t> encode_rle(const SegMask& mask);

/// Throws ParseError when the runs do not sum to width * height.
SegMask decode_rle(const std::vector<std::uint32_t>& runs, int width, int height,
                   std::string frame_id = {});

nlohmann::json rle_to_json(const SegMask& mask);
SegMask rle_from_json(const nlohmann::json& runs, int width, int height, std::string frame_id = {});

}  // namespace flymethrough
