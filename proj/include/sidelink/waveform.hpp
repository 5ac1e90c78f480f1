// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Steering vectors and multiband OFDM snapshot synthesis. One synthesized
// snapshot holds the pilot-divided channel observation for every array
// element and tone, with circularly-symmetric Gaussian noise drawn from a
// counter-based stream so identical seeds reproduce identical noise
// regardless of evaluation order.
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

#include "sidelink/channel.hpp"

namespace sidelink {

// ---------- STEERING VECTORS ----------

// Horizontal array response, entry n = exp(+j (2 pi / lambda) d_x n w) with
// spatial frequency w = cos(elevation) sin(azimuth), n = 0..n_x-1.
arma::cx_vec steering_x(const ArrayConfig& array, double wavelength, double azimuth,
                        double elevation);

// Same, parameterized directly by the spatial frequency w in [-1, 1].
arma::cx_vec steering_x_freq(const ArrayConfig& array, double wavelength, double spatial_freq);

// Vertical array response, entry n = exp(+j (2 pi / lambda) d_z n sin(elevation)).
arma::cx_vec steering_z(const ArrayConfig& array, double wavelength, double elevation);

// Full array response a = a_x kron a_z (x-major element order).
arma::cx_vec steering_full(const ArrayConfig& array, double wavelength, double azimuth,
                           double elevation);

// Multiband delay response d = d_B kron d_S:
//   [d_S]_s = exp(-j 2 pi s spacing tau),  s = 0..S-1
//   [d_B]_b = exp(-j 2 pi (f_b - f_0) tau)
// i.e. entry k = b*S+s equals exp(-j 2 pi (f_b - f_0 + s spacing) tau).
arma::cx_vec delay_steering(const BandPlan& bp, double delay);

// ---------- OBSERVATION ----------

// Shape of one synthesized snapshot; each layout pairs with one array kind.
enum class Layout { Tensor3D, Matrix2D, Vector1D };

Layout default_layout(ArrayKind kind);

// One noisy channel snapshot. Data is stored canonically as an
// n_z x n_x x (S*B) cube; Matrix2D has n_z = 1 and Vector1D a single element,
// so every layout is a reshape of the same entry set.
struct Observation {
    Layout layout = Layout::Vector1D;
    arma::cx_cube data; // n_z x n_x x n_tones
    BandPlan band_plan;
    ArrayConfig array;
    double energy = 0.0; // E_s per tone

    arma::uword n_tones() const { return data.n_slices; }

    // size() x n_tones view, row m = ix*n_z + iz (matches steering_full order).
    arma::cx_mat matrix() const;

    // n_tones view; requires a single-element array.
    arma::cx_vec vector() const;
};

// Synthesizes one snapshot:
//   data = sqrt(Es) sum_l gain_l * (spatial response) * (delay response) + noise,
// noise per entry CN(0, N0) keyed by (seed, canonical entry index) so layouts
// and algorithms sharing a seed see identical noise. N0 = 0 disables noise.
// Throws std::invalid_argument when the layout does not match the array kind
// or the path list is empty/invalid.
Observation synthesize(const PathList& paths, const ArrayConfig& array, const BandPlan& bp,
                       const SignalConfig& signal, Layout layout, std::uint64_t seed);

} // namespace sidelink
