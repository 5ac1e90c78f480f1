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

#include "sidelink/bounds.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "sidelink/common.hpp"

namespace sidelink {
namespace {

arma::uword los_index_of(const PathList& paths) {
    arma::uword found = paths.size();
    for (arma::uword i = 0; i < paths.size(); ++i) {
        if (paths[i].is_los) {
            if (found != paths.size()) {
                throw std::invalid_argument("path list carries more than one direct path");
            }
            found = i;
        }
    }
    if (found == paths.size()) {
        throw std::invalid_argument("path list carries no direct path");
    }
    return found;
}

arma::mat invert_information(const arma::mat& fim, const std::string& what) {
    const arma::mat sym = 0.5 * (fim + fim.t());
    arma::mat cov;
    if (!arma::inv_sympd(cov, sym) && !arma::inv(cov, sym)) {
        throw std::runtime_error(what + " is singular");
    }
    return cov;
}

// Derivatives of the noise-free received samples with respect to
// [t_axes..., delay, Re gain, Im gain] for one path. Sample order is
// element-major: row m * n_tones + k.
arma::cx_mat mean_derivatives(std::complex<double> gain, double delay, const arma::vec3& direction,
                              const arma::uvec& axes, const ArrayConfig& array,
                              const BandPlan& band_plan, const SignalConfig& signal) {
    if (std::abs(gain) == 0.0) {
        throw std::runtime_error("zero path gain makes the Fisher information singular");
    }
    const arma::mat pos = array.element_positions();
    const arma::vec offsets = band_plan.tone_offsets();
    const arma::uword n = pos.n_rows;
    const arma::uword k = offsets.n_elem;
    const double spatial = 2.0 * pi / band_plan.wavelength();
    const std::complex<double> j(0.0, 1.0);
    const double amp = std::sqrt(signal.energy_per_tone(band_plan));

    arma::cx_mat d(n * k, axes.n_elem + 3);
    for (arma::uword m = 0; m < n; ++m) {
        const std::complex<double> element =
            amp * gain * std::exp(j * (spatial * arma::dot(pos.row(m), direction)));
        for (arma::uword q = 0; q < k; ++q) {
            const std::complex<double> mu =
                element * std::exp(-j * (2.0 * pi * offsets(q) * delay));
            const arma::uword row = m * k + q;
            for (arma::uword a = 0; a < axes.n_elem; ++a) {
                d(row, a) = j * spatial * pos(m, axes(a)) * mu;
            }
            d(row, axes.n_elem) = -j * 2.0 * pi * offsets(q) * mu;
            d(row, axes.n_elem + 1) = mu / gain;
            d(row, axes.n_elem + 2) = j * mu / gain;
        }
    }
    return d;
}

arma::mat fim_from_derivatives(const arma::cx_mat& d, const SignalConfig& signal) {
    if (signal.noise_level() <= 0.0) {
        throw std::invalid_argument("noise level must be positive for Fisher analysis");
    }
    const arma::mat fim = (2.0 / signal.noise_level()) * arma::real(arma::cx_mat(d.t() * d));
    return 0.5 * (fim + fim.t());
}

// Moves the delay entry of a [t_obs..., delay] covariance block to the
// front, matching the RTT observation ordering.
arma::mat delay_first(const arma::mat& block, arma::uword n_axes) {
    arma::uvec perm(n_axes + 1);
    perm(0) = n_axes;
    for (arma::uword i = 0; i < n_axes; ++i) {
        perm(i + 1) = i;
    }
    return block.submat(perm, perm);
}

arma::vec merged_bias(const MergedPath& merged, const PathParam& los, const arma::uvec& axes) {
    const arma::vec3 tm = merged.direction();
    const arma::vec3 tl = los.direction();
    arma::vec b(axes.n_elem + 3);
    for (arma::uword i = 0; i < axes.n_elem; ++i) {
        b(i) = tm(axes(i)) - tl(axes(i));
    }
    b(axes.n_elem) = merged.delay - los.delay;
    b(axes.n_elem + 1) = merged.gain.real() - los.gain.real();
    b(axes.n_elem + 2) = merged.gain.imag() - los.gain.imag();
    return b;
}

// Covariance of the response-link estimate over [delay, t_obs...] under
// the given multipath treatment.
arma::mat response_link_cov(BoundMode mode, const PathList& paths, const ArrayConfig& array,
                            const BandPlan& band_plan, const SignalConfig& signal) {
    const ResolutionCell cell = resolution_cell(band_plan, array);
    const arma::uvec members = paths_in_los_cell(paths, cell);
    const arma::uvec axes = observable_axes(array);
    const arma::uword na = axes.n_elem;
    const arma::uword block = na + 3;
    const arma::uword los = los_index_of(paths);

    arma::mat sub;
    if (mode == BoundMode::LosPeb) {
        const PathParam& p = paths[los];
        const arma::mat cov = invert_information(
            fim_single_path(p.gain, p.delay, p.direction(), array, band_plan, signal),
            "direct-path Fisher information");
        sub = cov.submat(0, 0, na, na);
    } else if (mode == BoundMode::NlosPeb) {
        const arma::mat cov = invert_information(
            fim_multipath(paths, members, array, band_plan, signal),
            "multipath Fisher information");
        const arma::uvec where = arma::find(members == los);
        const arma::uword off = where(0) * block;
        sub = cov.submat(off, off, off + na, off + na);
    } else {
        const MergedPath merged = merge_paths(paths, members);
        const arma::mat fim = fim_merged(merged, array, band_plan, signal);
        const arma::mat cov = biased_crb(fim, merged_bias(merged, paths[los], axes));
        sub = cov.submat(0, 0, na, na);
    }
    return delay_first(sub, na);
}

// Delay variance of the request-link estimate under the same treatment.
double request_link_sigma(BoundMode mode, const PathList& paths, const ArrayConfig& array,
                          const BandPlan& band_plan, const SignalConfig& signal) {
    return response_link_cov(mode, paths, array, band_plan, signal)(0, 0);
}

}  // namespace

bool ResolutionCell::contains(const PathParam& reference, const PathParam& candidate) const {
    if (!(std::abs(candidate.delay - reference.delay) < delay_halfwidth)) {
        return false;
    }
    const arma::vec3 tr = reference.direction();
    const arma::vec3 tc = candidate.direction();
    return std::abs(tc(0) - tr(0)) < tx_halfwidth && std::abs(tc(2) - tr(2)) < tz_halfwidth;
}

ResolutionCell resolution_cell(const BandPlan& band_plan, const ArrayConfig& array) {
    band_plan.validate();
    array.validate();
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double lambda = band_plan.wavelength();
    ResolutionCell cell;
    cell.delay_halfwidth = 1.0 / (static_cast<double>(band_plan.subcarriers) * band_plan.spacing);
    cell.tx_halfwidth = array.aperture_x() > 0.0 ? lambda / array.aperture_x() : inf;
    cell.tz_halfwidth = array.aperture_z() > 0.0 ? lambda / array.aperture_z() : inf;
    return cell;
}

arma::uvec paths_in_los_cell(const PathList& paths, const ResolutionCell& cell) {
    const PathParam& reference = paths[los_index_of(paths)];
    std::vector<arma::uword> members;
    for (arma::uword i = 0; i < paths.size(); ++i) {
        if (cell.contains(reference, paths[i])) {
            members.push_back(i);
        }
    }
    return arma::uvec(members);
}

MergedPath merge_paths(const PathList& paths, const arma::uvec& member_set) {
    if (member_set.is_empty()) {
        throw std::invalid_argument("member set is empty");
    }
    const arma::uvec members = arma::unique(member_set);
    if (members(members.n_elem - 1) >= paths.size()) {
        throw std::invalid_argument("member index out of range");
    }

    double total = 0.0;
    for (const arma::uword idx : members) {
        total += std::abs(paths[idx].gain);
    }
    if (total <= 0.0) {
        throw std::invalid_argument("merge weights are undefined when every member gain is zero");
    }

    // Azimuths are averaged as offsets about the strongest member so a
    // cluster straddling the +-pi seam does not average through zero.
    arma::uword ref = members(0);
    for (const arma::uword idx : members) {
        if (std::abs(paths[idx].gain) > std::abs(paths[ref].gain)) {
            ref = idx;
        }
    }
    const double ref_azimuth = paths[ref].azimuth;

    MergedPath merged;
    merged.member_indices = members;
    merged.weights.set_size(members.n_elem);
    double delay = 0.0;
    double azimuth_offset = 0.0;
    double elevation = 0.0;
    std::complex<double> gain(0.0, 0.0);
    for (arma::uword i = 0; i < members.n_elem; ++i) {
        const PathParam& p = paths[members(i)];
        const double w = std::abs(p.gain) / total;
        merged.weights(i) = w;
        gain += p.gain;
        delay += w * p.delay;
        azimuth_offset += w * wrap_angle(p.azimuth - ref_azimuth);
        elevation += w * p.elevation;
    }
    merged.gain = gain;
    merged.delay = delay;
    merged.azimuth = wrap_angle(ref_azimuth + azimuth_offset);
    merged.elevation = elevation;
    return merged;
}

arma::uvec observable_axes(const ArrayConfig& array) {
    std::vector<arma::uword> axes;
    if (array.n_x > 1) {
        axes.push_back(0);
    }
    if (array.n_z > 1) {
        axes.push_back(2);
    }
    return arma::uvec(axes);
}

arma::mat fim_single_path(std::complex<double> gain, double delay, const arma::vec3& direction,
                          const ArrayConfig& array, const BandPlan& band_plan,
                          const SignalConfig& signal) {
    const arma::cx_mat d =
        mean_derivatives(gain, delay, direction, observable_axes(array), array, band_plan, signal);
    return fim_from_derivatives(d, signal);
}

arma::mat fim_merged(const MergedPath& merged, const ArrayConfig& array,
                     const BandPlan& band_plan, const SignalConfig& signal) {
    return fim_single_path(merged.gain, merged.delay, merged.direction(), array, band_plan,
                           signal);
}

arma::mat fim_multipath(const PathList& paths, const arma::uvec& members,
                        const ArrayConfig& array, const BandPlan& band_plan,
                        const SignalConfig& signal) {
    if (members.is_empty()) {
        throw std::invalid_argument("member set is empty");
    }
    const arma::uvec axes = observable_axes(array);
    const arma::uword block = axes.n_elem + 3;
    arma::cx_mat d(static_cast<arma::uword>(array.size()) * band_plan.n_tones(),
                   block * members.n_elem);
    for (arma::uword i = 0; i < members.n_elem; ++i) {
        if (members(i) >= paths.size()) {
            throw std::invalid_argument("member index out of range");
        }
        const PathParam& p = paths[members(i)];
        d.cols(i * block, (i + 1) * block - 1) =
            mean_derivatives(p.gain, p.delay, p.direction(), axes, array, band_plan, signal);
    }
    return fim_from_derivatives(d, signal);
}

arma::mat biased_crb(const arma::mat& fim, const arma::vec& bias) {
    if (!fim.is_square() || bias.n_elem != fim.n_rows) {
        throw std::invalid_argument("bias length must match the Fisher information dimension");
    }
    return invert_information(fim, "Fisher information matrix") + bias * bias.t();
}

arma::mat waa_covariance(double sigma_toa_request, const arma::mat& response_bound) {
    if (!response_bound.is_square() || response_bound.n_rows < 2 || response_bound.n_rows > 3) {
        throw std::invalid_argument(
            "covariance must cover the round-trip delay and one or two direction components");
    }
    if (sigma_toa_request < 0.0) {
        throw std::invalid_argument("request-link delay variance must be non-negative");
    }
    arma::mat out = response_bound;
    out(0, 0) += sigma_toa_request;
    return out;
}

arma::mat rtt_observation_covariance(BoundMode mode, const PathList& response_paths,
                                     const PathList& request_paths,
                                     const ArrayConfig& response_array,
                                     const ArrayConfig& request_array,
                                     const BandPlan& band_plan, const SignalConfig& signal) {
    response_array.validate();
    request_array.validate();
    band_plan.validate();
    signal.validate();
    const arma::mat response =
        response_link_cov(mode, response_paths, response_array, band_plan, signal);
    const double sigma2 =
        request_link_sigma(mode, request_paths, request_array, band_plan, signal);
    return waa_covariance(sigma2, response);
}

double map_to_position_bound(const arma::mat& cov_rtt, const Pose& rsu,
                             const arma::vec3& cru_position, const arma::uvec& direction_axes) {
    if (!cov_rtt.is_square() || cov_rtt.n_rows != direction_axes.n_elem + 1) {
        throw std::invalid_argument("covariance size must match the observation dimension");
    }
    if (direction_axes.is_empty()) {
        throw std::invalid_argument("position bound requires at least one direction component");
    }
    const arma::vec3 delta = cru_position - rsu.position;
    const double range = arma::norm(delta);
    if (range < 1e-9) {
        throw std::invalid_argument("receiver coincides with the anchor");
    }
    const arma::vec3 u = delta / range;

    // Direction sensitivity in the anchor body frame; only the horizontal
    // coordinates of the receiver are free.
    const arma::mat tangent =
        rsu.global_to_body() * (arma::eye(3, 3) - u * u.t()) / range;
    arma::mat h(cov_rtt.n_rows, 2);
    h(0, 0) = 2.0 * u(0) / speed_of_light;
    h(0, 1) = 2.0 * u(1) / speed_of_light;
    for (arma::uword i = 0; i < direction_axes.n_elem; ++i) {
        if (direction_axes(i) > 2) {
            throw std::invalid_argument("direction axis out of range");
        }
        h(i + 1, 0) = tangent(direction_axes(i), 0);
        h(i + 1, 1) = tangent(direction_axes(i), 1);
    }

    const arma::mat weight = invert_information(cov_rtt, "observation covariance");
    arma::mat position_cov;
    if (!arma::inv_sympd(position_cov, arma::mat(0.5 * (h.t() * weight * h +
                                                        (h.t() * weight * h).t())))) {
        throw std::runtime_error("geometry does not constrain the horizontal position");
    }
    return std::sqrt(arma::trace(position_cov));
}

double position_bound(BoundMode mode, const PathList& response_paths,
                      const PathList& request_paths, const ArrayConfig& response_array,
                      const ArrayConfig& request_array, const BandPlan& band_plan,
                      const SignalConfig& signal, const Pose& rsu,
                      const arma::vec3& cru_position) {
    const arma::uvec axes = observable_axes(response_array);
    if (axes.is_empty()) {
        throw std::invalid_argument("position bound requires angular aperture at the responder");
    }
    const arma::mat cov = rtt_observation_covariance(mode, response_paths, request_paths,
                                                     response_array, request_array, band_plan,
                                                     signal);
    return map_to_position_bound(cov, rsu, cru_position, axes);
}

BoundReport evaluate_bounds(const BoundConfig& config, const PathList& rsu_paths,
                            const PathList& cru_paths) {
    config.rsu_array.validate();
    config.cru_array.validate();
    config.band_plan.validate();
    config.signal.validate();

    const arma::uvec axes = observable_axes(config.rsu_array);
    const ResolutionCell cell = resolution_cell(config.band_plan, config.rsu_array);
    const arma::uvec members = paths_in_los_cell(rsu_paths, cell);
    const MergedPath merged = merge_paths(rsu_paths, members);
    const PathParam& los = rsu_paths[los_index_of(rsu_paths)];

    BoundReport report;
    report.fim = fim_merged(merged, config.rsu_array, config.band_plan, config.signal);
    report.bias = merged_bias(merged, los, axes);
    report.channel_crb = arma::diagvec(biased_crb(report.fim, report.bias));
    report.sigma_toa = request_link_sigma(BoundMode::Waa, cru_paths, config.cru_array,
                                          config.band_plan, config.signal);
    report.waa_cov = rtt_observation_covariance(BoundMode::Waa, rsu_paths, cru_paths,
                                                config.rsu_array, config.cru_array,
                                                config.band_plan, config.signal);
    report.peb_los = position_bound(BoundMode::LosPeb, rsu_paths, cru_paths, config.rsu_array,
                                    config.cru_array, config.band_plan, config.signal,
                                    config.rsu, config.cru_position);
    report.peb_nlos = position_bound(BoundMode::NlosPeb, rsu_paths, cru_paths, config.rsu_array,
                                     config.cru_array, config.band_plan, config.signal,
                                     config.rsu, config.cru_position);
    report.peb_waa = map_to_position_bound(report.waa_cov, config.rsu, config.cru_position, axes);
    return report;
}

}  // namespace sidelink
