#include "bandrank/rng.hpp"

#include <cmath>
#include <numbers>

namespace bandrank {

double Xoshiro256::normal() noexcept {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace bandrank
