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

#include "sidelink/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sidelink/common.hpp"

namespace sidelink {
namespace {

double los_delay_of(const EstimationResult& est) {
    if (est.delays.is_empty() || est.los_index >= est.delays.n_elem) {
        throw std::runtime_error("link estimate carries no usable direct-path delay");
    }
    return est.delays(est.los_index);
}

arma::mat inverse_covariance(const arma::mat& covariance) {
    arma::mat weight;
    if (!arma::inv_sympd(weight, arma::mat(0.5 * (covariance + covariance.t())))) {
        throw std::invalid_argument("measurement covariance must be symmetric positive definite");
    }
    return weight;
}

// Residual z - h(x) with the azimuth component wrapped; elevation and
// direction cosines never cross the cut.
arma::vec residual(const RttMeasurement& meas, const arma::vec& predicted) {
    arma::vec e = meas.z() - predicted;
    if (meas.aoa_kind == AoaKind::AzimuthElevation) {
        e(1) = wrap_angle(e(1));
    }
    return e;
}

// Jacobian of the predicted observation with respect to the horizontal
// receiver coordinates.
arma::mat measurement_jacobian(AoaKind kind, const Pose& rsu, const arma::vec3& cru_position) {
    const arma::vec3 delta = cru_position - rsu.position;
    const double range = arma::norm(delta);
    if (range < 1e-9) {
        throw std::invalid_argument("receiver coincides with the anchor");
    }
    const arma::vec3 u = delta / range;
    const arma::vec3 t = rsu.global_to_body() * u;
    // Columns: sensitivity of the body-frame direction to (x, y).
    const arma::mat full = rsu.global_to_body() * (arma::eye(3, 3) - u * u.t()) / range;
    const arma::mat tangent = full.cols(0, 1);

    const arma::uword d = kind == AoaKind::AzimuthElevation ? 3 : 2;
    arma::mat j(d, 2);
    j(0, 0) = 2.0 * u(0) / speed_of_light;
    j(0, 1) = 2.0 * u(1) / speed_of_light;
    if (kind == AoaKind::SpatialFrequency) {
        j.row(1) = tangent.row(0);
        return j;
    }
    const double horiz2 = t(0) * t(0) + t(1) * t(1);
    if (horiz2 < 1e-12) {
        throw std::runtime_error("arrival direction too close to the array pole");
    }
    j.row(1) = (t(1) * tangent.row(0) - t(0) * tangent.row(1)) / horiz2;
    const double cos_el = std::sqrt(std::max(1.0 - t(2) * t(2), 1e-12));
    j.row(2) = tangent.row(2) / cos_el;
    return j;
}

}  // namespace

double rtt_exchange(double request_tau_hat, double response_tau_hat,
                    const RttProtocol& protocol) {
    // The receiver-clock stamp is t_req + bias + request_tau_hat and the
    // reply is sent at stamp - bias; the bias drops out exactly.
    return protocol.t_req + request_tau_hat + response_tau_hat;
}

double response_time(double request_tau_hat, const RttProtocol& protocol) {
    return protocol.t_req + request_tau_hat;
}

double request_toa_in_receiver_clock(double request_tau_hat, const RttProtocol& protocol) {
    return protocol.t_req + protocol.clock_bias + request_tau_hat;
}

arma::vec RttMeasurement::z() const {
    const double two_way = rtt_toa - t_req;
    if (aoa_kind == AoaKind::AzimuthElevation) {
        return arma::vec{two_way, azimuth, elevation};
    }
    return arma::vec{two_way, spatial_freq};
}

void RttMeasurement::validate() const {
    if (!(rtt_toa > 0.0) || !(rtt_toa > t_req)) {
        throw std::invalid_argument("round-trip arrival stamp must follow the request");
    }
    if (!covariance.is_square() || covariance.n_rows != dim()) {
        throw std::invalid_argument("covariance size must match the observation dimension");
    }
    inverse_covariance(covariance);
}

RttMeasurement assemble_measurement(const EstimationResult& rsu_estimate,
                                    const EstimationResult& cru_estimate,
                                    const RttProtocol& protocol, const arma::mat& covariance) {
    const double request_tau = los_delay_of(cru_estimate);
    const double response_tau = los_delay_of(rsu_estimate);

    RttMeasurement meas;
    meas.t_req = protocol.t_req;
    meas.t_res = response_time(request_tau, protocol);
    meas.rtt_toa = rtt_exchange(request_tau, response_tau, protocol);
    if (!rsu_estimate.azimuths.is_empty()) {
        if (rsu_estimate.los_index >= rsu_estimate.azimuths.n_elem) {
            throw std::runtime_error("direct-path index exceeds the angle estimates");
        }
        meas.aoa_kind = AoaKind::AzimuthElevation;
        meas.azimuth = rsu_estimate.azimuths(rsu_estimate.los_index);
        meas.elevation = rsu_estimate.elevations(rsu_estimate.los_index);
    } else if (!rsu_estimate.spatial_freqs.is_empty()) {
        meas.aoa_kind = AoaKind::SpatialFrequency;
        meas.spatial_freq = rsu_estimate.los_spatial_freq;
    } else {
        throw std::runtime_error("anchor-side estimate carries no direction information");
    }
    meas.covariance = covariance;
    meas.validate();
    return meas;
}

arma::mat measurement_covariance(const arma::mat& rtt_cov, AoaKind kind, double azimuth,
                                 double elevation) {
    if (kind == AoaKind::SpatialFrequency) {
        if (!rtt_cov.is_square() || rtt_cov.n_rows != 2) {
            throw std::invalid_argument("spatial-frequency covariance must be 2 x 2");
        }
        return rtt_cov;
    }
    if (!rtt_cov.is_square() || rtt_cov.n_rows != 3) {
        throw std::invalid_argument("angle covariance requires a 3 x 3 delay/cosine bound");
    }
    const double ce = std::cos(elevation);
    const double ca = std::cos(azimuth);
    if (std::abs(ce) < 1e-6 || std::abs(ca) < 1e-6) {
        throw std::invalid_argument("angle linearisation degenerates near the array pole");
    }
    // Inverse of d(t_x, t_z)/d(az, el) for t_x = cos(el) sin(az),
    // t_z = sin(el).
    arma::mat t(3, 3, arma::fill::zeros);
    t(0, 0) = 1.0;
    t(1, 1) = 1.0 / (ce * ca);
    t(1, 2) = std::sin(elevation) * std::sin(azimuth) / (ce * ce * ca);
    t(2, 2) = 1.0 / ce;
    return arma::mat(t * rtt_cov * t.t());
}

arma::vec predict_measurement(AoaKind kind, const Pose& rsu, const arma::vec3& cru_position) {
    const arma::vec3 delta = cru_position - rsu.position;
    const double range = arma::norm(delta);
    if (range < 1e-9) {
        throw std::invalid_argument("receiver coincides with the anchor");
    }
    const arma::vec3 t = rsu.global_to_body() * (delta / range);
    const double two_way = 2.0 * range / speed_of_light;
    if (kind == AoaKind::SpatialFrequency) {
        return arma::vec{two_way, t(0)};
    }
    const AzEl aoa = angles_from_direction(t);
    return arma::vec{two_way, aoa.azimuth, aoa.elevation};
}

arma::vec3 implied_direction(const RttMeasurement& meas, const Pose& rsu, double cru_height) {
    if (meas.aoa_kind == AoaKind::AzimuthElevation) {
        return direction_vector(meas.azimuth, meas.elevation);
    }
    const double range = speed_of_light * (meas.rtt_toa - meas.t_req) / 2.0;
    if (range <= 0.0) {
        throw std::runtime_error("measured range is not positive");
    }
    const double w = std::clamp(meas.spatial_freq, -1.0, 1.0);
    const double uz = std::clamp((cru_height - rsu.position(2)) / range, -1.0, 1.0);

    // Intersect t_x = w, |t| = 1 with the known global vertical component:
    // row3(B) . t = uz where B maps body to global.
    const arma::rowvec3 r3 = rsu.body_to_global().row(2);
    const double a = r3(1);
    const double b = r3(2);
    const double c0 = uz - r3(0) * w;
    const double rho2 = std::max(1.0 - w * w, 0.0);
    const double n2 = a * a + b * b;

    double ty;
    double tz;
    if (n2 < 1e-18) {
        ty = std::sqrt(rho2);
        tz = 0.0;
    } else {
        const double along = c0 / n2;
        double slack2 = rho2 - c0 * c0 / n2;
        if (slack2 < 0.0) {
            slack2 = 0.0;  // noisy range pushed the circle away; take the closest point
        }
        const double s = std::sqrt(slack2 / n2);
        // Two intersections; an array facing the scene sees sources with
        // positive body-frame y.
        const double ty_plus = along * a - s * b;
        const double ty_minus = along * a + s * b;
        if (ty_plus >= ty_minus) {
            ty = ty_plus;
            tz = along * b + s * a;
        } else {
            ty = ty_minus;
            tz = along * b - s * a;
        }
    }
    arma::vec3 t{w, ty, tz};
    const double norm = arma::norm(t);
    if (norm < 1e-9) {
        throw std::runtime_error("implied direction is degenerate");
    }
    return t / norm;
}

arma::vec2 ls_initialize(const RttMeasurement& meas, const Pose& rsu, double cru_height) {
    const double range = speed_of_light * (meas.rtt_toa - meas.t_req) / 2.0;
    const double dz = cru_height - rsu.position(2);
    if (range < std::abs(dz)) {
        throw std::runtime_error("measured range cannot reach the receiver height");
    }
    const double horizontal = std::sqrt(std::max(range * range - dz * dz, 0.0));

    const arma::vec3 u = rsu.body_to_global() * implied_direction(meas, rsu, cru_height);
    const double planar = std::hypot(u(0), u(1));
    arma::vec2 bearing{0.0, 1.0};
    if (planar > 1e-9) {
        bearing = arma::vec2{u(0) / planar, u(1) / planar};
    }
    return arma::vec2{rsu.position(0) + horizontal * bearing(0),
                      rsu.position(1) + horizontal * bearing(1)};
}

PositionFix ml_position(const RttMeasurement& meas, const Pose& rsu, double cru_height,
                        const arma::vec2& init) {
    meas.validate();
    const arma::mat weight = inverse_covariance(meas.covariance);
    const auto cost_at = [&](const arma::vec2& xy) {
        const arma::vec3 p{xy(0), xy(1), cru_height};
        const arma::vec e = residual(meas, predict_measurement(meas.aoa_kind, rsu, p));
        return arma::as_scalar(e.t() * weight * e);
    };

    PositionFix fix;
    fix.position = init;
    fix.cost = cost_at(init);
    arma::vec2 best = init;
    double best_cost = fix.cost;
    bool diverged = false;

    for (arma::uword iter = 0; iter < 100; ++iter) {
        fix.iterations = iter + 1;
        const arma::vec3 p{fix.position(0), fix.position(1), cru_height};
        const arma::vec e = residual(meas, predict_measurement(meas.aoa_kind, rsu, p));
        const arma::mat j = measurement_jacobian(meas.aoa_kind, rsu, p);
        const arma::mat normal = j.t() * weight * j;
        arma::vec2 step;
        if (!arma::solve(step, normal, arma::vec(j.t() * weight * e),
                         arma::solve_opts::no_approx)) {
            diverged = true;  // singular normal equations; keep the best iterate
            break;
        }

        double scale = 1.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
            const arma::vec2 candidate = fix.position + scale * step;
            const double c = cost_at(candidate);
            if (c <= fix.cost) {
                fix.position = candidate;
                fix.cost = c;
                accepted = true;
            } else {
                scale *= 0.5;
            }
        }
        if (!accepted) {
            diverged = true;  // cost rises along the Gauss-Newton direction
            break;
        }
        if (fix.cost < best_cost) {
            best = fix.position;
            best_cost = fix.cost;
        }
        if (arma::norm(scale * step) < 1e-9) {
            break;
        }
    }

    fix.converged = !diverged;
    fix.position = best;
    fix.cost = best_cost;
    const arma::vec3 p{fix.position(0), fix.position(1), cru_height};
    const arma::vec e = residual(meas, predict_measurement(meas.aoa_kind, rsu, p));
    const arma::mat j = measurement_jacobian(meas.aoa_kind, rsu, p);
    fix.gradient_norm = arma::norm(arma::vec(2.0 * j.t() * weight * e));
    return fix;
}

}  // namespace sidelink
