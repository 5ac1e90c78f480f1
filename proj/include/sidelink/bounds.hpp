// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Fisher-information machinery for the RTT positioning link: resolution
// cells, sub-resolution path merging, biased Cramer-Rao bounds, and the
// Jacobian-mapped position error bounds (genie LoS, full multipath, and
// the merged-path weighted-average approximation).
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

#include "sidelink/channel.hpp"
#include "sidelink/geometry.hpp"

namespace sidelink {

// Region of (delay, direction-cosine) space within which two paths cannot
// be separated by non-super-resolution processing. Halfwidths on axes the
// array cannot resolve (no aperture) are infinite, which removes the
// corresponding membership condition.
struct ResolutionCell {
    double delay_halfwidth = 0.0;  // 1 / (S * subcarrier spacing), seconds
    double tx_halfwidth = 0.0;     // wavelength / horizontal aperture
    double tz_halfwidth = 0.0;     // wavelength / vertical aperture

    // True when (delay, direction) lies inside the cell centred on the
    // reference path. All finite conditions are simultaneous and strict.
    bool contains(const PathParam& reference, const PathParam& candidate) const;
};

ResolutionCell resolution_cell(const BandPlan& band_plan, const ArrayConfig& array);

// Indices of paths falling inside the resolution cell centred on the LoS
// path. Throws std::invalid_argument when the list carries no LoS path.
// The LoS index itself is always a member.
arma::uvec paths_in_los_cell(const PathList& paths, const ResolutionCell& cell);

// Effective single path replacing everything inside the LoS resolution
// cell: coherent gain sum, magnitude-weighted delay and angles.
struct MergedPath {
    std::complex<double> gain{0.0, 0.0};
    double delay = 0.0;
    double azimuth = 0.0;
    double elevation = 0.0;
    arma::vec weights;          // one per member, non-negative, sums to 1
    arma::uvec member_indices;  // into the originating path list

    arma::vec3 direction() const { return direction_vector(azimuth, elevation); }
};

// Throws std::invalid_argument when the member set is empty or every
// member gain is zero (weights undefined). A zero coherent sum with
// non-zero magnitudes is a valid cancellation case.
MergedPath merge_paths(const PathList& paths, const arma::uvec& member_set);

// Direction components the array can observe: column indices into the
// body-frame direction vector (0 for x, 2 for z). The y component is
// never observable and is always removed.
arma::uvec observable_axes(const ArrayConfig& array);

// Slepian-Bangs FIM of the single-path model over the observable part of
// [t_x, t_z, delay, Re gain, Im gain], in that order with unobservable
// direction rows removed. Throws std::runtime_error on zero gain.
arma::mat fim_single_path(std::complex<double> gain, double delay, const arma::vec3& direction,
                          const ArrayConfig& array, const BandPlan& band_plan,
                          const SignalConfig& signal);

arma::mat fim_merged(const MergedPath& merged, const ArrayConfig& array,
                     const BandPlan& band_plan, const SignalConfig& signal);

// Joint FIM over `members`, path-major: one [t_obs..., delay, Re, Im]
// block per member, including all cross-information terms.
arma::mat fim_multipath(const PathList& paths, const arma::uvec& members,
                        const ArrayConfig& array, const BandPlan& band_plan,
                        const SignalConfig& signal);

// Covariance lower bound J^-1 + b b^T for an estimator with additive
// bias b. Throws std::runtime_error when the FIM is singular.
arma::mat biased_crb(const arma::mat& fim, const arma::vec& bias);

// Adds the request-link ToA variance to the round-trip delay entry of a
// response-link covariance over [rtt delay, t_obs...].
arma::mat waa_covariance(double sigma_toa_request, const arma::mat& response_bound);

enum class BoundMode {
    LosPeb,   // genie: LoS path alone on both links
    NlosPeb,  // every in-cell path kept as an unknown nuisance
    Waa       // merged single path plus its deterministic bias
};

// Covariance of the RTT observation [rtt delay, t_obs...] for one mode.
// Both links contribute: the response link through the full bound over
// delay and direction, the request link through its delay variance only.
arma::mat rtt_observation_covariance(BoundMode mode, const PathList& response_paths,
                                     const PathList& request_paths,
                                     const ArrayConfig& response_array,
                                     const ArrayConfig& request_array,
                                     const BandPlan& band_plan, const SignalConfig& signal);

// Maps an RTT observation covariance to a horizontal position error bound
// at the given geometry (known receiver height). `direction_axes` names
// the body-frame direction components present in the covariance, in
// order, after the leading round-trip delay entry.
double map_to_position_bound(const arma::mat& cov_rtt, const Pose& rsu,
                             const arma::vec3& cru_position, const arma::uvec& direction_axes);

double position_bound(BoundMode mode, const PathList& response_paths,
                      const PathList& request_paths, const ArrayConfig& response_array,
                      const ArrayConfig& request_array, const BandPlan& band_plan,
                      const SignalConfig& signal, const Pose& rsu, const arma::vec3& cru_position);

struct BoundConfig {
    ArrayConfig rsu_array;  // response-link receive array
    ArrayConfig cru_array;  // request-link receive array, usually single
    BandPlan band_plan;
    SignalConfig signal;
    Pose rsu;
    arma::vec3 cru_position;
};

struct BoundReport {
    arma::mat fim;        // response-link FIM at the merged parameters
    arma::vec bias;       // merged minus true LoS, observable ordering
    arma::vec channel_crb;  // diagonal of J^-1 + b b^T
    double sigma_toa = 0.0;  // request-link delay variance (merged model)
    arma::mat waa_cov;    // merged-model covariance over [rtt, t_obs...]
    double peb_los = 0.0;
    double peb_nlos = 0.0;
    double peb_waa = 0.0;
};

// Evaluates all three position bounds at the true geometry. Path lists
// are the receive-side parameters of the same physical channel at each
// end of the exchange.
BoundReport evaluate_bounds(const BoundConfig& config, const PathList& rsu_paths,
                            const PathList& cru_paths);

}  // namespace sidelink
