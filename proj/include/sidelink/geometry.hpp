// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Poses, rotations, and direction/angle conversions shared by the scene
// simulator, the estimators, and the positioning stage.
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

#include <armadillo>

#include "sidelink/common.hpp"

namespace sidelink {

// ---------- POSE ----------

// Position plus orientation of a radio end point.
// rotation = (roll, pitch, yaw) in rad, each in (-pi, pi]; the body frame is
// reached from the global frame by intrinsic Z-Y-X: yaw about z, then pitch
// about the new y, then roll about the new x.
struct Pose {
    arma::vec3 position{arma::fill::zeros}; // m, global frame
    arma::vec3 rotation{arma::fill::zeros}; // rad, (roll, pitch, yaw)

    // Body-to-global rotation matrix R = Rz(yaw) * Ry(pitch) * Rx(roll).
    arma::mat33 body_to_global() const;

    // Global-to-body matrix applied to arrival directions; transpose of the above.
    arma::mat33 global_to_body() const;
};

// ---------- DIRECTION / ANGLE CONVERSIONS ----------

// Unit direction for (azimuth, elevation):
//   t = [cos(el) sin(az), cos(el) cos(az), sin(el)];
// azimuth 0 points along +y, elevation is measured from the horizontal plane.
arma::vec3 direction_vector(double azimuth, double elevation);

// Inverse of direction_vector. Throws std::invalid_argument if |norm(t)-1| > 1e-9.
// At the poles (|elevation| = pi/2) azimuth is defined as 0.
struct AzEl {
    double azimuth;   // rad, (-pi, pi]
    double elevation; // rad, [-pi/2, pi/2]
};
AzEl angles_from_direction(const arma::vec3& t);

// Unit arrival direction of the signal from `point` as seen in the receiver's
// body frame. Throws std::invalid_argument when `point` coincides with the
// receiver position.
arma::vec3 local_arrival_direction(const Pose& receiver, const arma::vec3& point);

} // namespace sidelink
