// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Deterministic single-bounce propagation scenes: vertical rectangular
// reflectors, an optional ground plane, binary occlusion, and the image
// method for specular paths.
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

#include <string>
#include <vector>

#include "sidelink/channel.hpp"
#include "sidelink/geometry.hpp"

namespace sidelink {

// ---------- SCENE DESCRIPTION ----------

// Vertical planar rectangle: spans corner + s*[horizontal, 0] + t*[0, 0, height],
// s, t in [0, 1]. Reflects with amplitude factor `loss` and blocks rays.
struct Reflector {
    arma::vec3 corner{arma::fill::zeros}; // lower corner, m
    arma::vec2 horizontal{arma::fill::zeros}; // horizontal edge (x, y), m
    double height = 0.0;                  // vertical extent, m, > 0
    double loss = 1.0;                    // amplitude reflection factor in [0, 1]

    arma::vec3 edge_u() const { return {horizontal(0), horizontal(1), 0.0}; }
    arma::vec3 edge_v() const { return {0.0, 0.0, height}; }
    arma::vec3 normal() const; // unit, horizontal

    void validate() const;
};

struct Scene {
    Pose rsu;                          // road-side unit pose
    std::vector<Reflector> reflectors; // walls / barriers
    bool has_ground = false;           // horizontal reflector at z = 0
    double ground_loss = 1.0;          // amplitude factor in [0, 1]
    double cru_height = 1.5;           // known vehicle antenna height, m

    void validate() const;
};

// Appends the four vertical walls of an axis-aligned box footprint
// (center_x, center_y), size (size_x, size_y), from z = 0 to z = height.
void add_box(Scene& scene, double center_x, double center_y, double size_x, double size_y,
             double height, double loss);

// ---------- TRAJECTORY ----------

// Piecewise-linear route traversed at constant speed and sampled at a fixed
// interval; the first sample is the first waypoint.
struct Trajectory {
    arma::mat waypoints;          // n x 3, m
    double speed = 1.0;           // m/s, > 0
    double sample_interval = 1.0; // s, > 0

    std::vector<arma::vec3> sample_positions() const;

    void validate() const;
};

// ---------- PATH GENERATION ----------

// Which end of the link acts as the receiver (arrival angles are expressed in
// that end's body frame; the CRU body frame is axis-aligned).
enum class ReceiverEnd { AtRsu, AtCru };

// Deterministic path list for one CRU antenna position: the direct path when
// unobstructed plus one specular path per visible reflector (image method,
// single bounce) and optionally the ground bounce. Gains are free-space
// lambda/(4 pi d) times the reflection factor, carrier phase included.
// Output is sorted by delay; the direct path, when present, is first.
// Throws std::invalid_argument when the CRU coincides with the RSU or either
// end sits on a reflector surface.
PathList generate_paths(const Scene& scene, const arma::vec3& cru_position, ReceiverEnd end,
                        double wavelength);

// ---------- PATH LIST CSV ----------

// Columns: gain_re,gain_im,delay_s,azimuth_rad,elevation_rad,is_los.
// Header row required; '.' decimal; is_los written as 0/1.
void export_paths(const std::string& file, const PathList& paths);

// Throws std::runtime_error naming the offending row on parse or validation
// failure (including more than one direct path).
PathList import_paths(const std::string& file);

} // namespace sidelink
