#include "coldsim/units.hpp"

#include <charconv>
#include <limits>
#include <string>

#include "coldsim/error.hpp"

namespace coldsim {

std::uint64_t parse_size(std::string_view text) {
    std::uint64_t value = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) {
        throw InputError("invalid size '" + std::string(text) + "'");
    }
    const std::string_view suffix(ptr, static_cast<std::size_t>(last - ptr));
    std::uint64_t unit = 1;
    if (suffix.empty() || suffix == "B") {
        unit = 1;
    } else if (suffix == "KiB") {
        unit = kKiB;
    } else if (suffix == "MiB") {
        unit = kMiB;
    } else if (suffix == "GiB") {
        unit = kGiB;
    } else if (suffix == "TiB") {
        unit = 1024 * kGiB;
    } else {
        throw InputError("unknown size suffix in '" + std::string(text) + "' (use KiB, MiB, GiB, TiB)");
    }
    if (value > std::numeric_limits<std::uint64_t>::max() / unit) {
        throw InputError("size overflows 64 bits: '" + std::string(text) + "'");
    }
    return value * unit;
}

}  // namespace coldsim
