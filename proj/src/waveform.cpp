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

#include "sidelink/waveform.hpp"

#include <stdexcept>

namespace sidelink {

// ---------- STEERING VECTORS ----------

arma::cx_vec steering_x_freq(const ArrayConfig& array, double wavelength, double spatial_freq) {
    arma::cx_vec a(array.n_x);
    const double k = 2.0 * pi / wavelength * array.d_x * spatial_freq;
    for (arma::uword n = 0; n < array.n_x; ++n)
        a(n) = std::polar(1.0, k * double(n));
    return a;
}

arma::cx_vec steering_x(const ArrayConfig& array, double wavelength, double azimuth,
                        double elevation) {
    return steering_x_freq(array, wavelength, std::cos(elevation) * std::sin(azimuth));
}

arma::cx_vec steering_z(const ArrayConfig& array, double wavelength, double elevation) {
    arma::cx_vec a(array.n_z);
    const double k = 2.0 * pi / wavelength * array.d_z * std::sin(elevation);
    for (arma::uword n = 0; n < array.n_z; ++n)
        a(n) = std::polar(1.0, k * double(n));
    return a;
}

arma::cx_vec steering_full(const ArrayConfig& array, double wavelength, double azimuth,
                           double elevation) {
    return arma::kron(steering_x(array, wavelength, azimuth, elevation),
                      steering_z(array, wavelength, elevation));
}

arma::cx_vec delay_steering(const BandPlan& bp, double delay) {
    const arma::vec g = bp.tone_offsets();
    arma::cx_vec d(g.n_elem);
    for (arma::uword k = 0; k < g.n_elem; ++k)
        d(k) = std::polar(1.0, -2.0 * pi * g(k) * delay);
    return d;
}

// ---------- OBSERVATION ----------

Layout default_layout(ArrayKind kind) {
    switch (kind) {
    case ArrayKind::Ura:
        return Layout::Tensor3D;
    case ArrayKind::Ula:
        return Layout::Matrix2D;
    default:
        return Layout::Vector1D;
    }
}

arma::cx_mat Observation::matrix() const {
    arma::cx_mat m(array.size(), n_tones());
    for (arma::uword ix = 0; ix < array.n_x; ++ix)
        for (arma::uword iz = 0; iz < array.n_z; ++iz)
            for (arma::uword k = 0; k < n_tones(); ++k)
                m(ix * array.n_z + iz, k) = data(iz, ix, k);
    return m;
}

arma::cx_vec Observation::vector() const {
    if (array.size() != 1)
        throw std::invalid_argument("Observation::vector: array has more than one element");
    arma::cx_vec v(n_tones());
    for (arma::uword k = 0; k < n_tones(); ++k)
        v(k) = data(0, 0, k);
    return v;
}

Observation synthesize(const PathList& paths, const ArrayConfig& array, const BandPlan& bp,
                       const SignalConfig& signal, Layout layout, std::uint64_t seed) {
    array.validate();
    bp.validate();
    signal.validate();
    if (paths.empty())
        throw std::invalid_argument("synthesize: path list is empty");
    for (const auto& p : paths)
        p.validate();

    const ArrayKind kind = array.kind();
    const bool ok = (layout == Layout::Tensor3D && kind == ArrayKind::Ura) ||
                    (layout == Layout::Matrix2D && kind == ArrayKind::Ula) ||
                    (layout == Layout::Vector1D && kind == ArrayKind::Single);
    if (!ok)
        throw std::invalid_argument("synthesize: layout incompatible with array kind");

    const double lambda = bp.wavelength();
    const double es = signal.energy_per_tone(bp);
    const double amp = std::sqrt(es);
    const arma::uword n_tones = bp.n_tones();

    Observation obs;
    obs.layout = layout;
    obs.band_plan = bp;
    obs.array = array;
    obs.energy = es;
    obs.data.zeros(array.n_z, array.n_x, n_tones);

    for (const auto& p : paths) {
        const arma::cx_vec ax = steering_x(array, lambda, p.azimuth, p.elevation);
        const arma::cx_vec az = steering_z(array, lambda, p.elevation);
        const arma::cx_vec d = delay_steering(bp, p.delay);
        for (arma::uword k = 0; k < n_tones; ++k) {
            const std::complex<double> w = amp * p.gain * d(k);
            for (arma::uword ix = 0; ix < array.n_x; ++ix)
                for (arma::uword iz = 0; iz < array.n_z; ++iz)
                    obs.data(iz, ix, k) += w * ax(ix) * az(iz);
        }
    }

    const double n0 = signal.noise_level();
    if (n0 > 0.0) {
        // Canonical entry index m*n_tones + k, m = ix*n_z + iz: layout-independent.
        for (arma::uword ix = 0; ix < array.n_x; ++ix)
            for (arma::uword iz = 0; iz < array.n_z; ++iz) {
                const arma::uword m = ix * array.n_z + iz;
                for (arma::uword k = 0; k < n_tones; ++k)
                    obs.data(iz, ix, k) += rng::complex_normal(seed, m * n_tones + k, n0);
            }
    }
    return obs;
}

} // namespace sidelink
