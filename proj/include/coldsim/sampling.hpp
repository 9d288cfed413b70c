#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace coldsim {

// Uniform double in [0, 1) from the top 53 bits of one engine draw. Avoids the
// implementation-defined std distributions so output is identical everywhere.
inline double unit_uniform(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Inverse-CDF sampler over ranks 0..n-1 with P(r) proportional to (r+1)^-s.
class ZipfTable {
public:
    ZipfTable(std::uint64_t n, double exponent);

    std::uint64_t sample(std::mt19937_64& engine) const;
    double probability(std::uint64_t rank) const;
    std::uint64_t size() const noexcept { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

}  // namespace coldsim
