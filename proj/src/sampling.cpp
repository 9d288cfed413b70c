#include "coldsim/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "coldsim/error.hpp"

namespace coldsim {

ZipfTable::ZipfTable(std::uint64_t n, double exponent) {
    if (n == 0) throw InputError("zipf table needs at least one rank");
    if (!(exponent >= 0.0)) throw InputError("zipf exponent must be non-negative");
    cdf_.resize(n);
    double total = 0.0;
    for (std::uint64_t r = 0; r < n; ++r) {
        total += std::pow(static_cast<double>(r + 1), -exponent);
        cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
    cdf_.back() = 1.0;
}

std::uint64_t ZipfTable::sample(std::mt19937_64& engine) const {
    const double u = unit_uniform(engine);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint64_t>(it - cdf_.begin());
}

double ZipfTable::probability(std::uint64_t rank) const {
    return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
}

}  // namespace coldsim
