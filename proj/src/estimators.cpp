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

#include "sidelink/estimators.hpp"

#include <algorithm>
#include <limits>

namespace sidelink {

// ---------- SHARED BUILDING BLOCKS ----------

arma::cx_mat hankel(const arma::cx_vec& x, arma::uword p) {
    const arma::uword n = x.n_elem;
    if (p < 1 || p > n)
        throw std::invalid_argument("hankel: need 1 <= p <= len(x)");
    arma::cx_mat h(p, n + 1 - p);
    for (arma::uword i = 0; i < p; ++i)
        for (arma::uword j = 0; j < h.n_cols; ++j)
            h(i, j) = x(i + j);
    return h;
}

arma::uvec selection_indices_first(arma::uword blocks, arma::uword block_len,
                                   arma::uword shift) {
    if (blocks == 0 || block_len == 0 || shift >= block_len)
        throw std::invalid_argument("selection: need blocks,block_len >= 1 and shift < block_len");
    const arma::uword keep = block_len - shift;
    arma::uvec idx(blocks * keep);
    for (arma::uword b = 0; b < blocks; ++b)
        for (arma::uword i = 0; i < keep; ++i)
            idx(b * keep + i) = b * block_len + i;
    return idx;
}

arma::uvec selection_indices_last(arma::uword blocks, arma::uword block_len, arma::uword shift) {
    arma::uvec idx = selection_indices_first(blocks, block_len, shift);
    return idx + shift;
}

std::pair<arma::mat, arma::mat> selection_matrices(arma::uword blocks, arma::uword block_len,
                                                   arma::uword shift) {
    const arma::uvec i1 = selection_indices_first(blocks, block_len, shift);
    const arma::uvec i2 = selection_indices_last(blocks, block_len, shift);
    arma::mat j1(i1.n_elem, blocks * block_len, arma::fill::zeros);
    arma::mat j2 = j1;
    for (arma::uword r = 0; r < i1.n_elem; ++r) {
        j1(r, i1(r)) = 1.0;
        j2(r, i2(r)) = 1.0;
    }
    return {j1, j2};
}

arma::uword mdl_order(const arma::vec& sv, arma::uword n_snapshots) {
    const arma::uword p = sv.n_elem;
    if (p < 2)
        throw std::invalid_argument("mdl_order: need at least 2 singular values");
    if (n_snapshots == 0)
        throw std::invalid_argument("mdl_order: need n_snapshots >= 1");
    if (!sv.is_sorted("descend"))
        throw std::invalid_argument("mdl_order: singular values must be descending");

    arma::vec lam = arma::square(sv);
    const double floor_val =
        std::max(lam.max() * 1e-30, std::numeric_limits<double>::min());
    lam = arma::clamp(lam, floor_val, std::numeric_limits<double>::max());

    const double n = double(n_snapshots);
    double best = std::numeric_limits<double>::infinity();
    arma::uword best_k = 0;
    for (arma::uword k = 0; k < p; ++k) {
        const arma::vec tail = lam.subvec(k, p - 1);
        const double log_gm = arma::mean(arma::log(tail));
        const double log_am = std::log(arma::mean(tail));
        const double score = -n * double(p - k) * (log_gm - log_am) +
                             0.5 * double(k) * double(2 * p - k) * std::log(n);
        if (score < best) {
            best = score;
            best_k = k;
        }
    }
    return std::clamp<arma::uword>(best_k, 1, p - 1);
}

arma::vec default_delay_grid(const BandPlan& bp, double tau_max) {
    if (!(tau_max > 0.0))
        throw std::invalid_argument("default_delay_grid: tau_max must be > 0");
    const double step = 1.0 / (8.0 * bp.total_bandwidth());
    const arma::uword n = std::max<arma::uword>(3, arma::uword(std::ceil(tau_max / step)) + 1);
    return arma::regspace(0.0, step, double(n - 1) * step);
}

// ---------- INTERNAL HELPERS ----------

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Maximizes a unimodal function on [lo, hi] by golden-section search.
template <class F>
double golden_max(F&& f, double lo, double hi, int iters = 90) {
    constexpr double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

// Kolda-convention unfoldings of an I x J x K cube:
// mode 1: I x JK, column j + k*J; mode 2: J x IK, column i + k*I;
// mode 3: K x IJ, column i + j*I.
arma::cx_mat unfold(const arma::cx_cube& t, int mode) {
    const arma::uword I = t.n_rows, J = t.n_cols, K = t.n_slices;
    if (mode == 1) {
        arma::cx_mat x(I, J * K);
        for (arma::uword k = 0; k < K; ++k)
            x.cols(k * J, k * J + J - 1) = t.slice(k);
        return x;
    }
    if (mode == 2) {
        arma::cx_mat x(J, I * K);
        for (arma::uword k = 0; k < K; ++k)
            x.cols(k * I, k * I + I - 1) = t.slice(k).st();
        return x;
    }
    arma::cx_mat x(K, I * J);
    for (arma::uword k = 0; k < K; ++k)
        x.row(k) = arma::vectorise(t.slice(k)).st();
    return x;
}

// Column-wise Kronecker product; rows ordered so kr(C, B) matches the
// unfolding column order above (B-index fastest).
arma::cx_mat khatri_rao(const arma::cx_mat& c, const arma::cx_mat& b) {
    arma::cx_mat z(b.n_rows * c.n_rows, c.n_cols);
    for (arma::uword l = 0; l < c.n_cols; ++l)
        z.col(l) = arma::kron(c.col(l), b.col(l));
    return z;
}

// Average shift ratio sum_b (block.head)^H (block.tail) over `blocks` blocks
// of length block_len; returns the phase of the accumulated ratio.
double shift_ratio_phase(const arma::cx_vec& f, arma::uword blocks, arma::uword block_len) {
    std::complex<double> acc(0.0, 0.0);
    for (arma::uword b = 0; b < blocks; ++b) {
        const arma::cx_vec blk = f.subvec(b * block_len, (b + 1) * block_len - 1);
        acc += arma::cdot(blk.head(block_len - 1), blk.tail(block_len - 1));
    }
    return std::arg(acc);
}

// |a_x(w)^H v|^2 spatial-frequency correlation with grid + local refinement.
double peak_spatial_freq(const arma::cx_vec& v, const ArrayConfig& array, double wavelength) {
    const auto g = [&](double w) {
        return std::norm(arma::cdot(steering_x_freq(array, wavelength, w), v));
    };
    const double step = 0.005;
    double best_w = -1.0, best_val = -1.0;
    for (double w = -1.0; w <= 1.0 + 1e-12; w += step) {
        const double val = g(w);
        if (val > best_val) {
            best_val = val;
            best_w = w;
        }
    }
    return golden_max(g, std::max(-1.0, best_w - step), std::min(1.0, best_w + step));
}

// Matched-filter delay stage shared by every layout: grid argmax of
// ||Y conj(d(tau))||^2 with continuous refinement.
struct DelayPeak {
    double delay;
    double peak_to_mean;
};
DelayPeak peak_delay(const arma::cx_mat& y, const BandPlan& bp, const arma::vec& grid) {
    if (grid.n_elem < 2 || !grid.is_sorted("strictascend"))
        throw std::invalid_argument("matched filter: delay grid must be ascending, >= 2 points");
    const auto g = [&](double tau) {
        const arma::cx_vec v = y * arma::conj(delay_steering(bp, tau));
        return std::real(arma::cdot(v, v));
    };
    arma::vec vals(grid.n_elem);
    for (arma::uword i = 0; i < grid.n_elem; ++i)
        vals(i) = g(grid(i));
    const arma::uword imax = vals.index_max();
    const double lo = grid(imax > 0 ? imax - 1 : 0);
    const double hi = grid(std::min(imax + 1, grid.n_elem - 1));
    const double mean_val = arma::mean(vals);
    return {golden_max(g, lo, hi), mean_val > 0.0 ? vals(imax) / mean_val : 0.0};
}

// Sorts paired per-path vectors by ascending delay.
void sort_paired_by_delay(EstimationResult& r) {
    if (r.delays.n_elem < 2)
        return;
    const arma::uvec ord = arma::sort_index(r.delays);
    r.delays = r.delays(ord);
    if (r.azimuths.n_elem == ord.n_elem)
        r.azimuths = r.azimuths(ord);
    if (r.elevations.n_elem == ord.n_elem)
        r.elevations = r.elevations(ord);
    if (r.spatial_freqs.n_elem == ord.n_elem)
        r.spatial_freqs = r.spatial_freqs(ord);
}

// Minimum delay among height-plausible paths; falls back to the unfiltered
// minimum (flagged) when the gate rejects everything.
void apply_los_gate(EstimationResult& r, const LosGate& gate) {
    if (r.delays.n_elem == 0)
        return;
    r.los_index = r.delays.index_min();
    r.los_gate_fallback = false;
    if (!gate.enabled || r.elevations.n_elem != r.delays.n_elem ||
        r.azimuths.n_elem != r.delays.n_elem)
        return;
    const arma::mat33 rbg = gate.receiver.body_to_global();
    double best_delay = inf;
    arma::uword best = r.delays.n_elem;
    for (arma::uword l = 0; l < r.delays.n_elem; ++l) {
        const double range = speed_of_light * r.delays(l);
        const arma::vec3 t = direction_vector(r.azimuths(l), r.elevations(l));
        const double implied = gate.receiver.position(2) + range * arma::dot(rbg.row(2).t(), t);
        if (std::abs(implied - gate.cru_height) <= gate.tolerance && r.delays(l) < best_delay) {
            best_delay = r.delays(l);
            best = l;
        }
    }
    if (best < r.delays.n_elem)
        r.los_index = best;
    else
        r.los_gate_fallback = true;
}

// Delay eigenvalues of the shift-invariance equation on a signal subspace
// whose rows are `blocks` stacked blocks of length block_len.
arma::vec esprit_delays(const arma::cx_mat& u, arma::uword blocks, arma::uword block_len,
                        double spacing) {
    const arma::uvec i1 = selection_indices_first(blocks, block_len, 1);
    const arma::uvec i2 = selection_indices_last(blocks, block_len, 1);
    const arma::cx_mat psi = arma::pinv(arma::cx_mat(u.rows(i1))) * u.rows(i2);
    arma::cx_vec ev;
    arma::cx_mat dummy;
    if (!arma::eig_gen(ev, dummy, psi))
        throw std::runtime_error("shift-invariance eigen-decomposition failed");
    arma::vec delays(ev.n_elem);
    for (arma::uword l = 0; l < ev.n_elem; ++l)
        delays(l) = -std::arg(ev(l)) / (2.0 * pi * spacing);
    return delays;
}

void require_layout(const Observation& obs, Layout want, const char* who) {
    if (obs.layout != want)
        throw std::invalid_argument(std::string(who) + ": wrong observation layout");
}

} // namespace

// ---------- MATCHED FILTER ----------

EstimationResult mf_delay(const Observation& obs, const arma::vec& delay_grid) {
    const DelayPeak pk = peak_delay(obs.matrix(), obs.band_plan, delay_grid);
    EstimationResult r;
    r.estimator = EstimatorId::MatchedFilter;
    r.delays = {pk.delay};
    r.model_order = 1;
    r.los_index = 0;
    r.peak_to_mean = pk.peak_to_mean;
    return r;
}

EstimationResult mf_ula(const Observation& obs, const arma::vec& delay_grid) {
    require_layout(obs, Layout::Matrix2D, "mf_ula");
    const arma::cx_mat y = obs.matrix();
    EstimationResult r = mf_delay(obs, delay_grid);
    const arma::cx_vec v = y * arma::conj(delay_steering(obs.band_plan, r.delays(0)));
    const double w = peak_spatial_freq(v, obs.array, obs.band_plan.wavelength());
    r.spatial_freqs = {w};
    r.los_spatial_freq = w;
    return r;
}

EstimationResult mf_ura(const Observation& obs, const arma::vec& delay_grid,
                        const arma::vec& az_grid, const arma::vec& el_grid) {
    require_layout(obs, Layout::Tensor3D, "mf_ura");
    const arma::cx_mat y = obs.matrix();
    EstimationResult r = mf_delay(obs, delay_grid);

    const double lambda = obs.band_plan.wavelength();
    const arma::cx_vec v = y * arma::conj(delay_steering(obs.band_plan, r.delays(0)));
    // v reshaped so column ix holds the vertical snapshot of element column ix.
    arma::cx_mat vm(obs.array.n_z, obs.array.n_x);
    for (arma::uword ix = 0; ix < obs.array.n_x; ++ix)
        for (arma::uword iz = 0; iz < obs.array.n_z; ++iz)
            vm(iz, ix) = v(ix * obs.array.n_z + iz);

    const auto g = [&](double az, double el) {
        const arma::cx_vec ax = steering_x(obs.array, lambda, az, el);
        const arma::cx_vec az_v = steering_z(obs.array, lambda, el);
        std::complex<double> acc(0.0, 0.0);
        for (arma::uword ix = 0; ix < obs.array.n_x; ++ix)
            acc += std::conj(ax(ix)) * arma::cdot(az_v, vm.col(ix));
        return std::norm(acc);
    };

    const arma::vec azg = az_grid.n_elem ? az_grid
                                         : arma::regspace(-pi / 2, default_angle_step, pi / 2);
    const arma::vec elg = el_grid.n_elem ? el_grid
                                         : arma::regspace(-pi / 2, default_angle_step, pi / 2);
    double best_val = -1.0, best_az = 0.0, best_el = 0.0;
    for (arma::uword ie = 0; ie < elg.n_elem; ++ie)
        for (arma::uword ia = 0; ia < azg.n_elem; ++ia) {
            const double val = g(azg(ia), elg(ie));
            if (val > best_val) {
                best_val = val;
                best_az = azg(ia);
                best_el = elg(ie);
            }
        }
    // Coordinate-wise continuous refinement around the grid peak. The two
    // angles are coupled away from broadside, so several sweeps are needed
    // before the pair settles.
    const double az_step = azg.n_elem > 1 ? azg(1) - azg(0) : default_angle_step;
    const double el_step = elg.n_elem > 1 ? elg(1) - elg(0) : default_angle_step;
    for (int round = 0; round < 8; ++round) {
        best_az = golden_max([&](double a) { return g(a, best_el); },
                             std::max(-pi / 2, best_az - az_step),
                             std::min(pi / 2, best_az + az_step));
        best_el = golden_max([&](double e) { return g(best_az, e); },
                             std::max(-pi / 2, best_el - el_step),
                             std::min(pi / 2, best_el + el_step));
    }
    r.azimuths = {best_az};
    r.elevations = {best_el};
    return r;
}

// ---------- CANONICAL POLYADIC DECOMPOSITION ----------

namespace {

arma::cx_mat random_factor(arma::uword rows, arma::uword cols, std::uint64_t key) {
    arma::cx_mat m(rows, cols);
    for (arma::uword i = 0; i < m.n_elem; ++i)
        m(i) = rng::complex_normal(key, i, 1.0);
    return m;
}

// One least-squares factor update: solves min ||X - A Z^T||_F for A given the
// Khatri-Rao design Z and the Gram matrix G = Z^H Z of the other two factors.
// The normal equations read A (Z^T conj(Z)) = X conj(Z); Z^T conj(Z) = conj(G),
// so the transposed system is solved against G itself (G is Hermitian).
arma::cx_mat als_update(const arma::cx_mat& x, const arma::cx_mat& z, const arma::cx_mat& gram) {
    const arma::cx_mat w = x * arma::conj(z);
    arma::cx_mat a;
    if (!arma::solve(a, gram, w.st(), arma::solve_opts::no_approx))
        a = arma::pinv(gram) * w.st();
    return a.st();
}

} // namespace

CpdFactors cpd(const arma::cx_cube& tensor, arma::uword order, std::uint64_t seed,
               const CpdOptions& opts) {
    if (order < 1)
        throw std::invalid_argument("cpd: order must be >= 1");
    if (tensor.n_elem == 0)
        throw std::invalid_argument("cpd: empty tensor");

    const arma::uword I = tensor.n_rows, J = tensor.n_cols, K = tensor.n_slices;
    const arma::cx_mat x1 = unfold(tensor, 1);
    const arma::cx_mat x2 = unfold(tensor, 2);
    const arma::cx_mat x3 = unfold(tensor, 3);
    const double norm_x = arma::norm(arma::vectorise(tensor), 2);
    const double scale = norm_x > 0.0 ? norm_x : 1.0;

    CpdFactors best;
    best.fit = inf;
    bool any_completed = false;

    for (arma::uword restart = 0; restart < std::max<arma::uword>(1, opts.restarts); ++restart) {
        const std::uint64_t rkey = rng::derive(seed, restart);
        arma::cx_mat a1 = random_factor(I, order, rng::derive(rkey, 1));
        arma::cx_mat a2 = random_factor(J, order, rng::derive(rkey, 2));
        arma::cx_mat a3 = random_factor(K, order, rng::derive(rkey, 3));

        double prev_fit = inf;
        arma::uword increases = 0;
        bool diverged = false;
        CpdFactors best_here;
        best_here.fit = inf;

        arma::uword it = 0;
        for (; it < opts.max_iter; ++it) {
            const arma::cx_mat g2 = a2.t() * a2;
            const arma::cx_mat g3 = a3.t() * a3;
            a1 = als_update(x1, khatri_rao(a3, a2), g3 % g2);
            const arma::cx_mat g1 = a1.t() * a1;
            a2 = als_update(x2, khatri_rao(a3, a1), g3 % g1);
            a3 = als_update(x3, khatri_rao(a2, a1), (a2.t() * a2) % g1);

            const double fit =
                arma::norm(x3 - a3 * khatri_rao(a2, a1).st(), "fro") / scale;
            if (fit < best_here.fit)
                best_here = {a1, a2, a3, fit, it + 1};

            if (fit > prev_fit + 1e-14) {
                if (++increases >= opts.divergence_patience) {
                    diverged = true;
                    break;
                }
            } else {
                increases = 0;
            }
            const bool settled = std::abs(prev_fit - fit) < opts.tol;
            prev_fit = fit;
            if (settled || fit < 1e-14)
                break;
        }

        if (!diverged)
            any_completed = true;
        if (best_here.fit < best.fit)
            best = best_here;
        if (best.fit < 1e-12)
            break; // exact decomposition found; further restarts are moot
    }

    if (!any_completed)
        throw CpdDivergence("cpd: every restart diverged (fit increased repeatedly)", best);
    return best;
}

arma::cx_cube cpd_reconstruct(const CpdFactors& f, arma::uword i, arma::uword j, arma::uword k) {
    arma::cx_cube t(i, j, k, arma::fill::zeros);
    for (arma::uword s = 0; s < k; ++s)
        t.slice(s) = f.a1 * arma::diagmat(f.a3.row(s)) * f.a2.st();
    return t;
}

bool cpd_rank_feasible(arma::uword I, arma::uword J, arma::uword K, arma::uword L) {
    const auto m = [L](arma::uword d) { return std::min(d, L); };
    return m(I) + m(J) + m(K) >= 2 * L + 2;
}

CpdPathParams cpd_extract(const CpdFactors& f, const ArrayConfig& array, const BandPlan& bp) {
    if (array.kind() != ArrayKind::Ura)
        throw std::invalid_argument("cpd_extract: planar array required");
    if (f.a1.n_rows != array.n_z || f.a2.n_rows != array.n_x ||
        f.a3.n_rows != bp.n_tones())
        throw std::invalid_argument("cpd_extract: factor shapes do not match array/band plan");

    const double lambda = bp.wavelength();
    const arma::uword L = f.a1.n_cols;
    CpdPathParams out;
    out.delays.set_size(L);
    out.azimuths.set_size(L);
    out.elevations.set_size(L);

    for (arma::uword l = 0; l < L; ++l) {
        const double ph_z = shift_ratio_phase(f.a1.col(l), 1, array.n_z);
        const double el = std::asin(std::clamp(ph_z * lambda / (2.0 * pi * array.d_z), -1.0, 1.0));
        if (std::abs(std::cos(el)) < 1e-6)
            throw std::invalid_argument("cpd_extract: azimuth undefined at |elevation| = pi/2");
        const double ph_x = shift_ratio_phase(f.a2.col(l), 1, array.n_x);
        const double az = std::asin(
            std::clamp(ph_x * lambda / (2.0 * pi * array.d_x * std::cos(el)), -1.0, 1.0));
        const double ph_d = shift_ratio_phase(f.a3.col(l), bp.n_bands(), bp.subcarriers);
        out.delays(l) = -ph_d / (2.0 * pi * bp.spacing);
        out.azimuths(l) = az;
        out.elevations(l) = el;
    }
    return out;
}

EstimationResult cpd_estimate(const Observation& obs, arma::uword order, std::uint64_t seed,
                              const LosGate& gate, const CpdOptions& opts) {
    require_layout(obs, Layout::Tensor3D, "cpd_estimate");
    arma::uword el = order;
    if (el == 0) {
        const arma::vec sv = arma::svd(unfold(obs.data, 3));
        el = mdl_order(sv, std::max(obs.data.n_slices, obs.data.n_rows * obs.data.n_cols));
        while (el > 1 &&
               !cpd_rank_feasible(obs.data.n_rows, obs.data.n_cols, obs.data.n_slices, el))
            --el;
    }
    const CpdFactors f = cpd(obs.data, el, seed, opts);
    const CpdPathParams p = cpd_extract(f, obs.array, obs.band_plan);

    EstimationResult r;
    r.estimator = EstimatorId::Cpd;
    r.delays = p.delays;
    r.azimuths = p.azimuths;
    r.elevations = p.elevations;
    r.model_order = el;
    sort_paired_by_delay(r);
    apply_los_gate(r, gate);
    return r;
}

// ---------- SPATIAL AUGMENTATION ----------

bool AugmentationConfig::feasible_3d(arma::uword order, const ArrayConfig& array,
                                     const BandPlan& bp) const {
    const arma::uword s = bp.subcarriers;
    if (n_z + n_x + 1 > s)
        return false;
    const arma::uword v = s - n_z - n_x;
    const arma::uword nz_aug = array.n_z * (n_z + 1);
    const arma::uword nx_aug = array.n_x * (n_x + 1);
    return std::min(nx_aug, order) + std::min(nz_aug, order) >= order + 2 &&
           v * bp.n_bands() >= order;
}

bool AugmentationConfig::feasible_2d(arma::uword order, const ArrayConfig& array,
                                     const BandPlan& bp) const {
    if (n_z != 0)
        return false;
    const arma::uword s = bp.subcarriers;
    if (n_x + 1 > s)
        return false;
    const arma::uword v = s - n_x;
    return order <= array.n_x * (n_x + 1) && order <= v * bp.n_bands();
}

AugmentationConfig AugmentationConfig::auto_3d(arma::uword order, const ArrayConfig& array,
                                               const BandPlan& bp) {
    AugmentationConfig best;
    bool found = false;
    const arma::uword cap = bp.subcarriers;
    for (arma::uword total = 0; total < cap && !found; ++total)
        for (arma::uword nx = 0; nx <= total; ++nx) {
            const AugmentationConfig c{nx, total - nx};
            if (c.feasible_3d(order, array, bp)) {
                best = c;
                found = true;
                break;
            }
        }
    if (!found)
        throw std::invalid_argument("AugmentationConfig: no feasible factors for this order");
    return best;
}

AugmentationConfig AugmentationConfig::auto_2d(arma::uword order, const ArrayConfig& array,
                                               const BandPlan& bp) {
    for (arma::uword nx = 0; nx < bp.subcarriers; ++nx) {
        const AugmentationConfig c{nx, 0};
        if (c.feasible_2d(order, array, bp))
            return c;
    }
    throw std::invalid_argument("AugmentationConfig: no feasible factors for this order");
}

arma::cx_cube spatial_augment_3d(const Observation& obs, const AugmentationConfig& aug) {
    require_layout(obs, Layout::Tensor3D, "spatial_augment_3d");
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    if (aug.n_z + aug.n_x + 1 > s)
        throw std::invalid_argument("spatial_augment_3d: factors leave no tones (V < 1)");
    const arma::uword v = s - aug.n_z - aug.n_x;
    const arma::uword wz = aug.n_z + 1, wx = aug.n_x + 1;

    arma::cx_cube out(obs.array.n_z * wz, obs.array.n_x * wx, v * nb);
    for (arma::uword iz = 0; iz < obs.array.n_z; ++iz)
        for (arma::uword i2 = 0; i2 < wz; ++i2)
            for (arma::uword ix = 0; ix < obs.array.n_x; ++ix)
                for (arma::uword r = 0; r < wx; ++r)
                    for (arma::uword b = 0; b < nb; ++b)
                        for (arma::uword t = 0; t < v; ++t)
                            out(iz * wz + i2, ix * wx + r, b * v + t) =
                                obs.data(iz, ix, b * s + i2 + r + t);
    return out;
}

arma::cx_mat spatial_augment_2d(const Observation& obs, const AugmentationConfig& aug) {
    require_layout(obs, Layout::Matrix2D, "spatial_augment_2d");
    if (aug.n_z != 0)
        throw std::invalid_argument("spatial_augment_2d: n_z must be 0 for a linear array");
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    if (aug.n_x + 1 > s)
        throw std::invalid_argument("spatial_augment_2d: factors leave no tones (V < 1)");
    const arma::uword v = s - aug.n_x;
    const arma::uword wx = aug.n_x + 1;

    arma::cx_mat out(obs.array.n_x * wx, v * nb);
    for (arma::uword ix = 0; ix < obs.array.n_x; ++ix)
        for (arma::uword r = 0; r < wx; ++r)
            for (arma::uword b = 0; b < nb; ++b)
                for (arma::uword t = 0; t < v; ++t)
                    out(ix * wx + r, b * v + t) = obs.data(0, ix, b * s + r + t);
    return out;
}

// ---------- SPATIALLY AUGMENTED CPD ----------

EstimationResult cpd_sa(const Observation& obs, const AugmentationConfig& aug, arma::uword order,
                        std::uint64_t seed, const LosGate& gate, const CpdOptions& opts) {
    require_layout(obs, Layout::Tensor3D, "cpd_sa");
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    if (aug.n_z + aug.n_x + 2 > s)
        throw std::invalid_argument("cpd_sa: need V >= 2 for delay recovery");
    const arma::uword v = s - aug.n_z - aug.n_x;

    const arma::cx_cube aug_tensor = spatial_augment_3d(obs, aug);

    arma::uword el = order;
    if (el == 0) {
        const arma::vec sv = arma::svd(unfold(aug_tensor, 3));
        el = mdl_order(sv, std::max(aug_tensor.n_slices, aug_tensor.n_rows * aug_tensor.n_cols));
        while (el > 1 && !aug.feasible_3d(el, obs.array, obs.band_plan))
            --el;
    } else if (!aug.feasible_3d(el, obs.array, obs.band_plan)) {
        throw std::invalid_argument("cpd_sa: augmentation factors infeasible for this order");
    }

    const CpdFactors f = cpd(aug_tensor, el, seed, opts);

    const double lambda = obs.band_plan.wavelength();
    const double spacing = obs.band_plan.spacing;
    EstimationResult r;
    r.estimator = EstimatorId::CpdSa;
    r.model_order = el;
    r.delays.set_size(el);
    r.azimuths.set_size(el);
    r.elevations.set_size(el);

    for (arma::uword l = 0; l < el; ++l) {
        // Delay from the augmented frequency factor (V-length blocks per band).
        const double ph_d = shift_ratio_phase(f.a3.col(l), nb, v);
        const double tau = -ph_d / (2.0 * pi * spacing);
        r.delays(l) = tau;

        // Windowed delay response entering the augmented spatial factors.
        const auto window = [&](arma::uword len) {
            arma::cx_vec w(len);
            for (arma::uword i = 0; i < len; ++i)
                w(i) = std::polar(1.0, -2.0 * pi * double(i) * spacing * tau);
            return w;
        };
        const arma::cx_vec wz = window(aug.n_z + 1);
        const arma::cx_vec wx = window(aug.n_x + 1);

        const arma::cx_vec fz = f.a1.col(l);
        const auto g_el = [&](double e) {
            return std::norm(
                arma::cdot(arma::kron(steering_z(obs.array, lambda, e), wz), fz));
        };
        double best_val = -1.0, best_el = 0.0;
        for (double e = -pi / 2; e <= pi / 2 + 1e-12; e += default_angle_step) {
            const double val = g_el(e);
            if (val > best_val) {
                best_val = val;
                best_el = e;
            }
        }
        best_el = golden_max(g_el, std::max(-pi / 2, best_el - default_angle_step),
                             std::min(pi / 2, best_el + default_angle_step));

        const arma::cx_vec fx = f.a2.col(l);
        const auto g_az = [&](double a) {
            return std::norm(
                arma::cdot(arma::kron(steering_x(obs.array, lambda, a, best_el), wx), fx));
        };
        best_val = -1.0;
        double best_az = 0.0;
        for (double a = -pi / 2; a <= pi / 2 + 1e-12; a += default_angle_step) {
            const double val = g_az(a);
            if (val > best_val) {
                best_val = val;
                best_az = a;
            }
        }
        best_az = golden_max(g_az, std::max(-pi / 2, best_az - default_angle_step),
                             std::min(pi / 2, best_az + default_angle_step));

        r.elevations(l) = best_el;
        r.azimuths(l) = best_az;
    }

    sort_paired_by_delay(r);
    apply_los_gate(r, gate);
    return r;
}

// ---------- SHIFT-INVARIANCE ESTIMATORS ----------

EstimationResult esprit_2d(const Observation& obs, arma::uword order) {
    require_layout(obs, Layout::Matrix2D, "esprit_2d");
    const arma::cx_mat y = obs.matrix();
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    if (order > obs.array.n_x)
        throw std::invalid_argument("esprit_2d: order exceeds array size; use the spatially "
                                    "augmented variant");

    arma::cx_mat u, vr;
    arma::vec sv;
    if (!arma::svd_econ(u, sv, vr, arma::cx_mat(y.st())))
        throw std::runtime_error("esprit_2d: SVD failed");

    arma::uword el = order;
    if (el == 0) {
        el = mdl_order(sv, std::max(y.n_rows, y.n_cols));
        el = std::min<arma::uword>(el, (s - 1) * nb);
    }
    if (sv(el - 1) < 1e-10 * sv(0))
        throw std::runtime_error("esprit_2d: signal subspace is rank deficient; use the "
                                 "spatially augmented variant");

    EstimationResult r;
    r.estimator = EstimatorId::Esprit2d;
    r.model_order = el;
    r.delays = arma::sort(esprit_delays(u.cols(0, el - 1), nb, s, obs.band_plan.spacing));
    r.los_index = 0;

    const arma::cx_vec v = y * arma::conj(delay_steering(obs.band_plan, r.delays(0)));
    r.los_spatial_freq = peak_spatial_freq(v, obs.array, obs.band_plan.wavelength());
    r.spatial_freqs = {r.los_spatial_freq};
    return r;
}

EstimationResult esprit_2d_sa(const Observation& obs, const AugmentationConfig& aug,
                              arma::uword order) {
    require_layout(obs, Layout::Matrix2D, "esprit_2d_sa");
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    const arma::uword wx = aug.n_x + 1;
    if (aug.n_x + 2 > s)
        throw std::invalid_argument("esprit_2d_sa: need V >= 2 for delay recovery");
    const arma::uword v = s - aug.n_x;
    const arma::uword nx_aug = obs.array.n_x * wx;

    const arma::cx_mat yt = spatial_augment_2d(obs, aug);

    arma::cx_mat u, vr;
    arma::vec sv;
    if (!arma::svd_econ(u, sv, vr, arma::cx_mat(yt.st())))
        throw std::runtime_error("esprit_2d_sa: SVD failed");

    // Delay selection needs (v-1)*nb rows, spatial selection nx_aug-wx rows.
    const arma::uword cap = std::min((v - 1) * nb, nx_aug - wx);
    arma::uword el = order;
    if (el == 0)
        el = std::min(mdl_order(sv, std::max(yt.n_rows, yt.n_cols)), cap);
    else if (el > cap || el > sv.n_elem)
        throw std::invalid_argument("esprit_2d_sa: order infeasible for these factors");

    EstimationResult r;
    r.estimator = EstimatorId::Esprit2dSa;
    r.model_order = el;
    r.delays = arma::sort(esprit_delays(u.cols(0, el - 1), nb, v, obs.band_plan.spacing));
    r.los_index = 0;

    // Spatial frequencies from the right singular subspace: the conjugated
    // subspace carries the augmented horizontal steering structure, shifted
    // by one physical element = wx stacked rows.
    const arma::cx_mat vc = arma::conj(vr.cols(0, el - 1));
    const arma::uvec i1 = selection_indices_first(1, nx_aug, wx);
    const arma::uvec i2 = selection_indices_last(1, nx_aug, wx);
    const arma::cx_mat phi = arma::pinv(arma::cx_mat(vc.rows(i1))) * vc.rows(i2);
    arma::cx_vec ev;
    arma::cx_mat dummy;
    if (!arma::eig_gen(ev, dummy, phi))
        throw std::runtime_error("esprit_2d_sa: spatial eigen-decomposition failed");
    const double lambda = obs.band_plan.wavelength();
    arma::vec freqs(ev.n_elem);
    for (arma::uword l = 0; l < ev.n_elem; ++l)
        freqs(l) = std::arg(ev(l)) * lambda / (2.0 * pi * obs.array.d_x);
    r.spatial_freqs = arma::sort(freqs);

    // Direct path: minimum delay paired with the entry nearest the
    // matched-filter coarse estimate on the raw observation.
    const arma::cx_mat y = obs.matrix();
    const arma::cx_vec vlos = y * arma::conj(delay_steering(obs.band_plan, r.delays(0)));
    const double w_mf = peak_spatial_freq(vlos, obs.array, lambda);
    r.los_spatial_freq = r.spatial_freqs(arma::abs(r.spatial_freqs - w_mf).index_min());
    return r;
}

EstimationResult esprit_1d(const Observation& obs, arma::uword hankel_rows, arma::uword order) {
    require_layout(obs, Layout::Vector1D, "esprit_1d");
    const arma::uword s = obs.band_plan.subcarriers;
    const arma::uword nb = obs.band_plan.n_bands();
    const arma::uword p = hankel_rows ? hankel_rows : (s + 2) / 2; // default ceil((S+1)/2)
    if (p < 2 || p > s - 1)
        throw std::invalid_argument("esprit_1d: need 2 <= hankel_rows <= S-1");
    const arma::uword q = s + 1 - p;

    const arma::cx_vec y = obs.vector();
    arma::cx_mat h(p * nb, q);
    for (arma::uword b = 0; b < nb; ++b)
        h.rows(b * p, (b + 1) * p - 1) = hankel(y.subvec(b * s, (b + 1) * s - 1), p);

    arma::cx_mat u, vr;
    arma::vec sv;
    if (!arma::svd_econ(u, sv, vr, h))
        throw std::runtime_error("esprit_1d: SVD failed");

    const arma::uword cap = std::min((p - 1) * nb, q);
    arma::uword el = order;
    if (el == 0)
        el = std::min(mdl_order(sv, std::max(h.n_rows, h.n_cols)), cap);
    else if (el > cap || el > sv.n_elem)
        throw std::invalid_argument("esprit_1d: order infeasible for this window");

    EstimationResult r;
    r.estimator = EstimatorId::Esprit1d;
    r.model_order = el;
    r.delays = arma::sort(esprit_delays(u.cols(0, el - 1), nb, p, obs.band_plan.spacing));
    r.los_index = 0;
    return r;
}

} // namespace sidelink
