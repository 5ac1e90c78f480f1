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

#include "sidelink/channel.hpp"

#include <stdexcept>

namespace sidelink {

void PathParam::validate() const {
    if (!(delay >= 0.0) || !std::isfinite(delay))
        throw std::invalid_argument("PathParam: delay must be finite and >= 0");
    if (!(azimuth > -pi - 1e-12) || !(azimuth <= pi + 1e-12))
        throw std::invalid_argument("PathParam: azimuth outside (-pi, pi]");
    if (!(elevation >= -pi / 2 - 1e-12) || !(elevation <= pi / 2 + 1e-12))
        throw std::invalid_argument("PathParam: elevation outside [-pi/2, pi/2]");
    if (!std::isfinite(gain.real()) || !std::isfinite(gain.imag()))
        throw std::invalid_argument("PathParam: gain must be finite");
}

arma::mat ArrayConfig::element_positions() const {
    arma::mat p(size(), 3, arma::fill::zeros);
    for (arma::uword ix = 0; ix < n_x; ++ix)
        for (arma::uword iz = 0; iz < n_z; ++iz) {
            const arma::uword m = ix * n_z + iz;
            p(m, 0) = double(ix) * d_x;
            p(m, 2) = double(iz) * d_z;
        }
    return p;
}

void ArrayConfig::validate() const {
    if (n_x == 0 || n_z == 0)
        throw std::invalid_argument("ArrayConfig: element counts must be >= 1");
    if (n_x > 1 && !(d_x > 0.0))
        throw std::invalid_argument("ArrayConfig: d_x must be > 0 when n_x > 1");
    if (n_z > 1 && !(d_z > 0.0))
        throw std::invalid_argument("ArrayConfig: d_z must be > 0 when n_z > 1");
}

arma::vec BandPlan::tone_offsets() const {
    arma::vec g(n_tones());
    for (arma::uword b = 0; b < n_bands(); ++b)
        for (arma::uword s = 0; s < subcarriers; ++s)
            g(b * subcarriers + s) = carriers(b) - carriers(0) + double(s) * spacing;
    return g;
}

void BandPlan::validate() const {
    if (carriers.n_elem == 0)
        throw std::invalid_argument("BandPlan: at least one carrier required");
    if (subcarriers < 2)
        throw std::invalid_argument("BandPlan: subcarriers must be >= 2");
    if (!(spacing > 0.0))
        throw std::invalid_argument("BandPlan: spacing must be > 0");
    if (!(carriers(0) > 0.0))
        throw std::invalid_argument("BandPlan: carriers must be positive");
    const double band_width = double(subcarriers) * spacing;
    for (arma::uword b = 1; b < carriers.n_elem; ++b) {
        if (!(carriers(b) > carriers(b - 1)))
            throw std::invalid_argument("BandPlan: carriers must be strictly increasing");
        if (carriers(b) - carriers(b - 1) < band_width - 1e-6)
            throw std::invalid_argument("BandPlan: bands overlap");
    }
}

void SignalConfig::validate() const {
    if (!(tx_power > 0.0))
        throw std::invalid_argument("SignalConfig: tx_power must be > 0");
    if (n_ofdm_symbols == 0)
        throw std::invalid_argument("SignalConfig: n_ofdm_symbols must be >= 1");
    if (noise_psd < 0.0)
        throw std::invalid_argument("SignalConfig: noise_psd must be >= 0");
    if (!(noise_figure >= 1.0))
        throw std::invalid_argument("SignalConfig: noise_figure must be >= 1");
}

} // namespace sidelink
