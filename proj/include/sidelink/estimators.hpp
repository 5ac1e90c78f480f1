// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Channel parameter estimators: matched filtering, canonical polyadic
// decomposition (plain and spatially augmented), and shift-invariance
// (ESPRIT-style) methods for 2-D, spatially augmented 2-D, and 1-D
// observations, plus the shared building blocks (Hankel stacking, selection
// matrices, information-criterion order selection).
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

#include <stdexcept>
#include <string>
#include <utility>

#include "sidelink/waveform.hpp"

namespace sidelink {

// ---------- RESULT TYPES ----------

enum class EstimatorId { MatchedFilter, Cpd, CpdSa, Esprit2d, Esprit2dSa, Esprit1d };

// Per-path estimates. Which fields are populated depends on the estimator:
// URA estimators fill azimuths/elevations, ULA estimators fill spatial_freqs
// (w = cos(el) sin(az)), 1-D estimators fill delays only. Delays are sorted
// ascending and angle entries (when paired) are permuted with them; the
// spatial-frequency list of the augmented 2-D method is unpaired (separate
// eigen-decompositions) and sorted ascending on its own.
struct EstimationResult {
    EstimatorId estimator = EstimatorId::MatchedFilter;
    arma::vec delays;        // s
    arma::vec azimuths;      // rad
    arma::vec elevations;    // rad
    arma::vec spatial_freqs; // dimensionless, in [-1, 1]
    arma::uword model_order = 0;     // number of recovered paths
    arma::uword los_index = 0;       // index into delays
    double los_spatial_freq = 0.0;   // ULA: spatial frequency paired with the direct path
    double peak_to_mean = 0.0;       // matched filter: peak power / mean grid power
    bool los_gate_fallback = false;  // height gate rejected everything; min-delay used
};

// Direct-path selection rule: minimum delay among paths whose implied source
// height (RSU height + range * global vertical direction component) is within
// `tolerance` of the known CRU antenna height. Disabled or non-applicable
// (no elevation estimates) gates reduce to plain minimum delay.
struct LosGate {
    bool enabled = false;
    Pose receiver;            // pose whose body frame the angles live in
    double cru_height = 0.0;  // m
    double tolerance = 2.0;   // m
};

// ---------- SHARED BUILDING BLOCKS ----------

// p x (n+1-p) Hankel matrix of x: H(i, j) = x(i + j).
// Throws std::invalid_argument unless 1 <= p <= n.
arma::cx_mat hankel(const arma::cx_vec& x, arma::uword p);

// Block selection matrices over `blocks` stacked blocks of length block_len:
// J1 keeps the first block_len-shift rows of each block, J2 the last.
// Both are (blocks*(block_len-shift)) x (blocks*block_len) 0/1 matrices.
std::pair<arma::mat, arma::mat> selection_matrices(arma::uword blocks, arma::uword block_len,
                                                   arma::uword shift);

// Row-index form of the same selections (J*M == M.rows(indices)).
arma::uvec selection_indices_first(arma::uword blocks, arma::uword block_len, arma::uword shift);
arma::uvec selection_indices_last(arma::uword blocks, arma::uword block_len, arma::uword shift);

// Minimum-description-length order estimate from singular values (descending)
// of a data matrix with n_snapshots columns; operates on squared singular
// values and clamps the result to [1, len(singular_values)-1].
arma::uword mdl_order(const arma::vec& singular_values, arma::uword n_snapshots);

// Default matched-filter delay grid: [0, tau_max] with step 1/(8 W).
arma::vec default_delay_grid(const BandPlan& bp, double tau_max);

// Default angle search step (0.5 degrees).
inline constexpr double default_angle_step = 0.5 * pi / 180.0;

// ---------- MATCHED FILTER ----------

// Single dominant path via correlation maximization over a delay grid with
// continuous local refinement; peak_to_mean flags low confidence on pure
// noise (no error is raised). Works on any layout.
EstimationResult mf_delay(const Observation& obs, const arma::vec& delay_grid);

// Adds the spatial-frequency stage for a linear array (Matrix2D layout).
EstimationResult mf_ula(const Observation& obs, const arma::vec& delay_grid);

// Adds the azimuth/elevation stage for a planar array (Tensor3D layout).
// Azimuth is searched in the front half-space [-pi/2, pi/2]: an array in the
// local x-z plane cannot observe the sign of t_y. Empty angle grids select
// the defaults (0.5 degree steps, full front sector).
EstimationResult mf_ura(const Observation& obs, const arma::vec& delay_grid,
                        const arma::vec& az_grid = {}, const arma::vec& el_grid = {});

// ---------- CANONICAL POLYADIC DECOMPOSITION ----------

struct CpdOptions {
    arma::uword max_iter = 500;          // alternating updates per restart
    double tol = 1e-8;                   // relative fit change convergence
    arma::uword restarts = 3;            // random restarts, best fit kept
    arma::uword divergence_patience = 5; // consecutive fit increases tolerated
};

// Rank-L factors of an I x J x K tensor; columns correspond across modes.
// Returned unnormalized (scale lives wherever the update left it).
struct CpdFactors {
    arma::cx_mat a1; // I x L, mode 1 (vertical / augmented vertical)
    arma::cx_mat a2; // J x L, mode 2 (horizontal / augmented horizontal)
    arma::cx_mat a3; // K x L, mode 3 (frequency)
    double fit = 0.0;           // relative residual after the final update
    arma::uword iterations = 0; // updates consumed by the winning restart
};

// Raised when every restart's fit increased repeatedly; carries the best
// factors seen so the caller can inspect the failure.
class CpdDivergence : public std::runtime_error {
public:
    CpdDivergence(const std::string& msg, CpdFactors best)
        : std::runtime_error(msg), best_factors(std::move(best)) {}
    CpdFactors best_factors;
};

// Alternating least squares from `restarts` random initializations drawn from
// `seed`; converged when the relative fit change drops below opts.tol.
CpdFactors cpd(const arma::cx_cube& tensor, arma::uword order, std::uint64_t seed,
               const CpdOptions& opts = {});

// Rank-1 reconstruction sum of the factors (test and diagnostics aid).
arma::cx_cube cpd_reconstruct(const CpdFactors& f, arma::uword i, arma::uword j, arma::uword k);

// Per-path (delay, azimuth, elevation) from plain URA factors via average
// shift ratios. Throws std::invalid_argument when |cos(elevation)| < 1e-6
// (azimuth undefined at the poles).
struct CpdPathParams {
    arma::vec delays;
    arma::vec azimuths;
    arma::vec elevations;
};
CpdPathParams cpd_extract(const CpdFactors& f, const ArrayConfig& array, const BandPlan& bp);

// Generic rank-recovery feasibility (Kruskal-style, generic factors):
// min(I,L) + min(J,L) + min(K,L) >= 2L + 2.
bool cpd_rank_feasible(arma::uword I, arma::uword J, arma::uword K, arma::uword L);

// End-to-end plain CPD estimator for a Tensor3D observation: order selection
// (explicit, or MDL on the mode-3 unfolding when order == 0), decomposition,
// parameter extraction, and direct-path selection.
EstimationResult cpd_estimate(const Observation& obs, arma::uword order, std::uint64_t seed,
                              const LosGate& gate = {}, const CpdOptions& opts = {});

// ---------- SPATIAL AUGMENTATION ----------

// Delay-domain smoothing factors trading frequency aperture for virtual
// array size: the augmented tensor has dims N_z(n_z+1) x N_x(n_x+1) x VB,
// V = S - n_z - n_x. (0, 0) is the identity.
struct AugmentationConfig {
    arma::uword n_x = 0;
    arma::uword n_z = 0;

    bool feasible_3d(arma::uword order, const ArrayConfig& array, const BandPlan& bp) const;
    bool feasible_2d(arma::uword order, const ArrayConfig& array, const BandPlan& bp) const;

    // Smallest factors (by n_x+n_z, then n_x) feasible for `order`.
    // Throws std::invalid_argument when no factors fit.
    static AugmentationConfig auto_3d(arma::uword order, const ArrayConfig& array,
                                      const BandPlan& bp);
    static AugmentationConfig auto_2d(arma::uword order, const ArrayConfig& array,
                                      const BandPlan& bp);
};

// Hankel window stacking of a Tensor3D observation along the tone axis; each
// (element, window offset) pair becomes a virtual element, leaving V = S-n_z-n_x
// tones per band. Throws std::invalid_argument when V < 1.
arma::cx_cube spatial_augment_3d(const Observation& obs, const AugmentationConfig& aug);

// 2-D variant for Matrix2D observations: N_x(n_x+1) x (S-n_x)B.
arma::cx_mat spatial_augment_2d(const Observation& obs, const AugmentationConfig& aug);

// ---------- HIGH-RESOLUTION ESTIMATORS ----------

// Spatially augmented CPD on a Tensor3D observation: augment, order by MDL on
// the augmented mode-3 unfolding (or explicit), decompose, read delays from
// frequency-factor shift ratios and angles from correlation peaks over the
// augmented steering models. Requires V >= 2; explicit infeasible orders
// throw, MDL orders are clamped to the feasible range.
EstimationResult cpd_sa(const Observation& obs, const AugmentationConfig& aug, arma::uword order,
                        std::uint64_t seed, const LosGate& gate = {}, const CpdOptions& opts = {});

// Shift-invariance delay estimation on a Matrix2D observation (signal
// subspace of Y^T, per-band subcarrier shift), direct-path spatial frequency
// from the matched-filter correlation at the minimum delay. order == 0
// selects MDL. Throws std::invalid_argument when order > n_x and
// std::runtime_error (recommending the augmented variant) on rank collapse
// (sigma_order/sigma_1 < 1e-10).
EstimationResult esprit_2d(const Observation& obs, arma::uword order = 0);

// Spatially augmented variant: delays from the left singular subspace of the
// augmented matrix, per-path spatial frequencies from the right subspace
// (block shift n_x+1); the two lists come from separate eigen-decompositions
// and are unpaired. The direct path pairs the minimum delay with the
// spatial-frequency entry closest to the matched-filter coarse estimate.
EstimationResult esprit_2d_sa(const Observation& obs, const AugmentationConfig& aug,
                              arma::uword order = 0);

// 1-D delay-only variant for single-antenna observations using per-band
// Hankel stacking with window length P (0 selects ceil((S+1)/2)).
// Identical duplicate delays collapse the signal subspace rank; the order
// estimate then counts the distinct delays only.
EstimationResult esprit_1d(const Observation& obs, arma::uword hankel_rows = 0,
                           arma::uword order = 0);

} // namespace sidelink
