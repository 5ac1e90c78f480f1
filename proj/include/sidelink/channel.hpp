// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Value types describing propagation paths, antenna arrays, the multiband
// frequency plan, and the OFDM signal budget.
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
#include <complex>
#include <vector>

#include "sidelink/common.hpp"
#include "sidelink/geometry.hpp"

namespace sidelink {

// ---------- PROPAGATION PATH ----------

// One resolvable propagation path, angles in the receiver's body frame.
struct PathParam {
    std::complex<double> gain{0.0, 0.0}; // complex amplitude, carrier phase included
    double delay = 0.0;                  // one-way propagation delay, s, >= 0
    double azimuth = 0.0;                // rad, (-pi, pi]
    double elevation = 0.0;              // rad, [-pi/2, pi/2]
    bool is_los = false;

    // Unit arrival direction in the receiver body frame.
    arma::vec3 direction() const { return direction_vector(azimuth, elevation); }

    // Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

using PathList = std::vector<PathParam>;

// ---------- ANTENNA ARRAY ----------

enum class ArrayKind { Single, Ula, Ura };

// Uniform rectangular array in the local x-z plane; element (ix, iz) sits at
// (ix*d_x, 0, iz*d_z). Flattened element order is x-major: m = ix*n_z + iz.
struct ArrayConfig {
    arma::uword n_x = 1; // elements along local x
    arma::uword n_z = 1; // elements along local z
    double d_x = 0.0;    // element spacing, m (ignored when n_x == 1)
    double d_z = 0.0;    // element spacing, m (ignored when n_z == 1)

    arma::uword size() const { return n_x * n_z; }

    ArrayKind kind() const {
        if (n_x == 1 && n_z == 1)
            return ArrayKind::Single;
        return n_z == 1 ? ArrayKind::Ula : ArrayKind::Ura;
    }

    double aperture_x() const { return (n_x > 1) ? double(n_x - 1) * d_x : 0.0; }
    double aperture_z() const { return (n_z > 1) ? double(n_z - 1) * d_z : 0.0; }

    // size() x 3 element positions in the body frame, x-major order.
    arma::mat element_positions() const;

    // Throws std::invalid_argument on zero element counts or non-positive
    // spacing along a populated axis.
    void validate() const;
};

// ---------- FREQUENCY PLAN ----------

// B bands of S subcarriers each; band b occupies carriers[b] + s*spacing.
struct BandPlan {
    arma::vec carriers;          // band carrier frequencies, Hz, strictly increasing
    arma::uword subcarriers = 0; // S, per band
    double spacing = 0.0;        // subcarrier spacing, Hz

    arma::uword n_bands() const { return carriers.n_elem; }
    arma::uword n_tones() const { return n_bands() * subcarriers; }

    // Aggregate occupied bandwidth W = S * B * spacing, Hz.
    double total_bandwidth() const { return double(n_tones()) * spacing; }

    // Carrier wavelength of the reference (first) band, m.
    double wavelength() const { return speed_of_light / carriers(0); }

    // Tone frequency offset from the reference carrier: f_b - f_0 + s*spacing,
    // flattened band-major (k = b*S + s).
    arma::vec tone_offsets() const;

    // Throws std::invalid_argument on empty carriers, S < 2, non-positive
    // spacing, non-increasing carriers, or overlapping bands.
    void validate() const;
};

// ---------- SIGNAL BUDGET ----------

struct SignalConfig {
    double tx_power = 0.0;         // P, W
    arma::uword n_ofdm_symbols = 1; // coherently accumulated symbols
    double noise_psd = 0.0;        // receiver-referred thermal density, W/Hz
    double noise_figure = 1.0;     // linear, >= 1

    // Pilot energy per tone: E_s = P * n_symbols / W.
    double energy_per_tone(const BandPlan& bp) const {
        return tx_power * double(n_ofdm_symbols) / bp.total_bandwidth();
    }

    // Per-tone noise level N0 = noise_psd * noise_figure.
    double noise_level() const { return noise_psd * noise_figure; }

    // Throws std::invalid_argument on non-positive power/symbols, negative
    // noise density, or noise figure < 1.
    void validate() const;
};

} // namespace sidelink
