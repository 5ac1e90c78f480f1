// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Multiband channel simulation, super-resolution estimation, and round-trip
// positioning for sub-6 GHz vehicular sidelink.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>

namespace sidelink {

// Propagation speed in m/s, shared by every delay/range conversion.
constexpr double speed_of_light = 299792458.0;

constexpr double pi = 3.141592653589793238462643383279502884;

// Wraps an angle to the interval (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * pi); // lands in [-pi, pi]
    if (a <= -pi)
        a = pi;
    return a;
}

inline double deg2rad(double d) { return d * pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / pi; }

// ---------- COUNTER-BASED RANDOM STREAMS ----------

// All stochastic draws come from a counter-based generator: the value at
// (key, counter) is a pure function of both, so independent entries can be
// generated in any order and layouts sharing a key see identical noise.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a child key; mixing is non-commutative so (a,b) != (b,a).
inline std::uint64_t derive(std::uint64_t key, std::uint64_t index) {
    return splitmix64(key ^ (0x9e3779b97f4a7c15ULL + index * 0xb5297a4d3a2ec4c1ULL));
}

// Uniform double in (0, 1], never exactly 0 (safe under log()).
inline double uniform(std::uint64_t key, std::uint64_t counter) {
    const std::uint64_t v = splitmix64(splitmix64(key ^ 0x6a09e667f3bcc909ULL) + counter);
    return static_cast<double>((v >> 11) + 1) * 0x1.0p-53;
}

// Pair of independent standard normal draws (Box-Muller).
inline std::pair<double, double> normal_pair(std::uint64_t key, std::uint64_t counter) {
    const double u1 = uniform(key, 2 * counter);
    const double u2 = uniform(key, 2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2)};
}

inline double normal(std::uint64_t key, std::uint64_t counter) {
    return normal_pair(key, counter).first;
}

// Circularly-symmetric complex normal draw with E|z|^2 = variance.
inline std::complex<double> complex_normal(std::uint64_t key, std::uint64_t counter,
                                           double variance) {
    const auto [re, im] = normal_pair(key, counter);
    const double s = std::sqrt(variance / 2.0);
    return {s * re, s * im};
}

} // namespace rng

} // namespace sidelink
