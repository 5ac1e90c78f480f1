// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Two-way ranging protocol and horizontal position estimation from one
// round-trip delay plus angle-of-arrival observation at a fixed anchor.
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

#include "sidelink/estimators.hpp"
#include "sidelink/geometry.hpp"

namespace sidelink {

struct RttProtocol {
    double t_req = 0.0;      // request transmit stamp in the anchor clock, s
    double clock_bias = 0.0; // receiver clock minus anchor clock, s
};

// Arrival stamp of the response at the anchor. The receiver replies at
// t_res = (request arrival stamp in its own clock) - clock_bias, so the
// bias cancels term by term; the combination is formed without it and is
// therefore bit-identical for any bias value.
double rtt_exchange(double request_tau_hat, double response_tau_hat,
                    const RttProtocol& protocol);

// Response transmit stamp in the anchor clock.
double response_time(double request_tau_hat, const RttProtocol& protocol);

// Request arrival stamp as the receiver's clock shows it. Diagnostic for
// the cancellation algebra; carries the bias explicitly.
double request_toa_in_receiver_clock(double request_tau_hat, const RttProtocol& protocol);

// Direction observation format attached to the ranging measurement.
// Planar arrays deliver both angles; linear arrays deliver the direction
// cosine along the array axis, with elevation recoverable only through
// the known receiver height.
enum class AoaKind { AzimuthElevation, SpatialFrequency };

struct RttMeasurement {
    double rtt_toa = 0.0;        // response arrival stamp at the anchor, s
    AoaKind aoa_kind = AoaKind::AzimuthElevation;
    double azimuth = 0.0;        // anchor body frame, rad
    double elevation = 0.0;      // anchor body frame, rad
    double spatial_freq = 0.0;   // direction cosine along the array axis
    arma::mat covariance;        // over [two-way delay, aoa components]
    double t_req = 0.0;
    double t_res = 0.0;

    arma::uword dim() const { return aoa_kind == AoaKind::AzimuthElevation ? 3 : 2; }
    // Observation vector [rtt_toa - t_req, aoa...]; the request stamp is
    // exact protocol metadata and is removed before estimation.
    arma::vec z() const;
    void validate() const;
};

// Builds the ranging measurement from the two link estimates. The
// direct-path delay of each estimate feeds the exchange; the direction
// comes from the anchor-side estimate. Throws std::runtime_error when
// either estimate failed to isolate the direct path.
RttMeasurement assemble_measurement(const EstimationResult& rsu_estimate,
                                    const EstimationResult& cru_estimate,
                                    const RttProtocol& protocol, const arma::mat& covariance);

// Maps a delay/direction-cosine covariance over [rtt, t_x(, t_z)] to the
// coordinates of the chosen observation format, linearised at the true
// arrival angles. Pass-through for the spatial-frequency format.
arma::mat measurement_covariance(const arma::mat& rtt_cov, AoaKind kind, double azimuth,
                                 double elevation);

// Noise-free observation predicted at a candidate receiver position.
arma::vec predict_measurement(AoaKind kind, const Pose& rsu, const arma::vec3& cru_position);

// Body-frame arrival direction implied by the measurement and the known
// receiver height; resolves the vertical ambiguity of linear arrays.
arma::vec3 implied_direction(const RttMeasurement& meas, const Pose& rsu, double cru_height);

// Closed-form range-bearing fix: horizontal range from the two-way delay
// and the height gap, bearing from the arrival direction. Throws
// std::runtime_error when the measured range cannot reach the receiver
// height (infeasible geometry).
arma::vec2 ls_initialize(const RttMeasurement& meas, const Pose& rsu, double cru_height);

struct PositionFix {
    arma::vec2 position{arma::fill::zeros};
    bool converged = false;
    arma::uword iterations = 0;
    double cost = 0.0;
    double gradient_norm = 0.0;
};

// Gauss-Newton minimisation of the weighted measurement misfit over the
// horizontal coordinates, with backtracking. Stops when the applied step
// drops below 1e-9 m or after 100 iterations; on divergence the best
// iterate is returned flagged as non-converged.
PositionFix ml_position(const RttMeasurement& meas, const Pose& rsu, double cru_height,
                        const arma::vec2& init);

}  // namespace sidelink
