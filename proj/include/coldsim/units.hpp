#pragma once

#include <cstdint>
#include <string_view>

namespace coldsim {

inline constexpr std::uint64_t kKiB = 1024;
inline constexpr std::uint64_t kMiB = 1024 * kKiB;
inline constexpr std::uint64_t kGiB = 1024 * kMiB;

// Parses "256MiB", "1GiB", "4096" (plain bytes) or "10KiB" to an exact byte
// count. Throws InputError on anything else, including overflow.
std::uint64_t parse_size(std::string_view text);

}  // namespace coldsim
