// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
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

#include "sidelink/geometry.hpp"

#include <stdexcept>

namespace sidelink {

arma::mat33 Pose::body_to_global() const {
    const double cr = std::cos(rotation(0)), sr = std::sin(rotation(0));
    const double cp = std::cos(rotation(1)), sp = std::sin(rotation(1));
    const double cy = std::cos(rotation(2)), sy = std::sin(rotation(2));

    const arma::mat33 Rx = {{1.0, 0.0, 0.0}, {0.0, cr, -sr}, {0.0, sr, cr}};
    const arma::mat33 Ry = {{cp, 0.0, sp}, {0.0, 1.0, 0.0}, {-sp, 0.0, cp}};
    const arma::mat33 Rz = {{cy, -sy, 0.0}, {sy, cy, 0.0}, {0.0, 0.0, 1.0}};
    return Rz * Ry * Rx;
}

arma::mat33 Pose::global_to_body() const {
    return body_to_global().t();
}

arma::vec3 direction_vector(double azimuth, double elevation) {
    const double ce = std::cos(elevation);
    return {ce * std::sin(azimuth), ce * std::cos(azimuth), std::sin(elevation)};
}

AzEl angles_from_direction(const arma::vec3& t) {
    const double n = arma::norm(t);
    if (std::abs(n - 1.0) > 1e-9)
        throw std::invalid_argument("angles_from_direction: input is not a unit vector");

    const double tz = std::clamp(t(2), -1.0, 1.0);
    const double el = std::asin(tz);
    // Azimuth is undefined at the poles; pinned to 0 there.
    double az = 0.0;
    if (std::abs(t(0)) > 0.0 || std::abs(t(1)) > 0.0)
        az = std::atan2(t(0), t(1));
    return {wrap_angle(az), el};
}

arma::vec3 local_arrival_direction(const Pose& receiver, const arma::vec3& point) {
    const arma::vec3 d = point - receiver.position;
    const double n = arma::norm(d);
    if (n < 1e-12)
        throw std::invalid_argument("local_arrival_direction: point coincides with receiver");
    return receiver.global_to_body() * (d / n);
}

} // namespace sidelink
