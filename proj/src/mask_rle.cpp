#include "flymethrough/mask_rle.hpp"

namespace flymethrough {

std::vector<std::uint32_t> encode_rle(const SegMask& mask) {
  std::vector<std::uint32_t> runs;
  const auto& bits = mask.bits();
  std::uint8_t current = 0;
  std::uint32_t length = 0;
  for (std::uint8_t b : bits) {
    if (b == current) {
      ++length;
      continue;
    }
    runs.push_back(length);
    current = b;
    length = 1;
  }
  runs.push_back(length);
  return runs;
}

SegMask decode_rle(const std::vector<std::uint32_t>& runs, int width, int height,
                   std::string frame_id) {
  SegMask mask(width, height, std::move(frame_id));
  const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::size_t pos = 0;
  bool fill = false;
  for (std::uint32_t run : runs) {
    if (run > total - pos) throw Error(ErrorCode::ParseError, "mask runs exceed mask size");
    if (fill) {
      for (std::size_t i = pos; i < pos + run; ++i) mask.set_index(i);
    }
    pos += run;
    fill = !fill;
  }
  if (pos != total) throw Error(ErrorCode::ParseError, "mask runs do not cover the mask");
  return mask;
}

nlohmann::json rle_to_json(const SegMask& mask) { return encode_rle(mask); }

SegMask rle_from_json(const nlohmann::json& runs, int width, int height, std::string frame_id) {
  if (!runs.is_array()) throw Error(ErrorCode::ParseError, "mask_rle must be an array");
  std::vector<std::uint32_t> values;
  values.reserve(runs.size());
  for (const auto& r : runs) {
    if (!r.is_number_unsigned() && !(r.is_number_integer() && r.get<std::int64_t>() >= 0)) {
      throw Error(ErrorCode::ParseError, "mask_rle entries must be non-negative integers");
    }
    const auto v = r.get<std::uint64_t>();
    if (v > 0xffffffffull) throw Error(ErrorCode::ParseError, "mask_rle run too long");
    values.push_back(static_cast<std::uint32_t>(v));
  }
  return decode_rle(values, width, height, std::move(frame_id));
}

}  // namespace flymethrough
