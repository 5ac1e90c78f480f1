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

#include "sidelink/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "sidelink/common.hpp"
#include "sidelink/waveform.hpp"

namespace sidelink {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

arma::vec3 read_vec3(const json& node, const std::string& what) {
    if (!node.is_array() || node.size() != 3) {
        throw std::invalid_argument(what + " must be an array of three numbers");
    }
    return {node[0].get<double>(), node[1].get<double>(), node[2].get<double>()};
}

ArrayConfig parse_array(const json& node, double wavelength) {
    ArrayConfig array;
    array.n_x = node.at("n_x").get<arma::uword>();
    array.n_z = node.at("n_z").get<arma::uword>();
    const double spacing = node.value("spacing_wavelengths", 0.5);
    array.d_x = node.contains("d_x_m") ? node["d_x_m"].get<double>() : spacing * wavelength;
    array.d_z = node.contains("d_z_m") ? node["d_z_m"].get<double>() : spacing * wavelength;
    array.validate();
    return array;
}

// Algorithms each array shape supports; anything else is a config error.
void check_algorithm(EstimatorId id, const ArrayConfig& rsu_array) {
    const ArrayKind kind = rsu_array.kind();
    bool ok = false;
    switch (id) {
    case EstimatorId::MatchedFilter:
        ok = true;
        break;
    case EstimatorId::Cpd:
    case EstimatorId::CpdSa:
        ok = kind == ArrayKind::Ura;
        break;
    case EstimatorId::Esprit2d:
    case EstimatorId::Esprit2dSa:
        ok = kind == ArrayKind::Ula && rsu_array.n_x > 1;
        break;
    case EstimatorId::Esprit1d:
        ok = kind == ArrayKind::Single;
        break;
    }
    if (!ok) {
        throw std::invalid_argument("algorithm " + algorithm_name(id) +
                                    " does not apply to the configured anchor array");
    }
}

EstimationResult estimate_response(EstimatorId id, const Observation& obs,
                                   const ExperimentConfig& cfg, const LosGate& gate,
                                   std::uint64_t seed) {
    switch (id) {
    case EstimatorId::MatchedFilter: {
        const arma::vec grid = default_delay_grid(obs.band_plan, cfg.mf_tau_max);
        switch (obs.array.kind()) {
        case ArrayKind::Ura:
            return mf_ura(obs, grid);
        case ArrayKind::Ula:
            return mf_ula(obs, grid);
        default:
            return mf_delay(obs, grid);
        }
    }
    case EstimatorId::Cpd:
        return cpd_estimate(obs, 0, seed, gate);
    case EstimatorId::CpdSa:
        return cpd_sa(obs, cfg.augmentation, 0, seed, gate);
    case EstimatorId::Esprit2d:
        return esprit_2d(obs, 0);
    case EstimatorId::Esprit2dSa:
        return esprit_2d_sa(obs, cfg.augmentation, 0);
    case EstimatorId::Esprit1d:
        return esprit_1d(obs);
    }
    throw std::logic_error("unhandled estimator");
}

// The vehicle end is a single antenna; ranging there uses the matched
// filter for the matched-filter family and subspace delay estimation for
// the high-resolution families.
EstimationResult estimate_request(EstimatorId id, const Observation& obs,
                                  const ExperimentConfig& cfg) {
    if (id == EstimatorId::MatchedFilter) {
        return mf_delay(obs, default_delay_grid(obs.band_plan, cfg.mf_tau_max));
    }
    return esprit_1d(obs);
}

struct TrajectoryContext {
    arma::vec3 cru_position{arma::fill::zeros};
    PathList rsu_paths;
    PathList cru_paths;
    bool geometry_ok = false;
    bool bounds_ok = false;
    BoundReport bounds;
};

TrajectoryContext prepare_point(const ExperimentConfig& cfg, const arma::vec3& position) {
    TrajectoryContext ctx;
    ctx.cru_position = position;
    try {
        if (cfg.imported.active) {
            ctx.rsu_paths = cfg.imported.rsu_paths;
            ctx.cru_paths = cfg.imported.cru_paths;
        } else {
            ctx.rsu_paths = generate_paths(cfg.scene, position, ReceiverEnd::AtRsu,
                                           cfg.band_plan.wavelength());
            ctx.cru_paths = generate_paths(cfg.scene, position, ReceiverEnd::AtCru,
                                           cfg.band_plan.wavelength());
        }
        ctx.geometry_ok = !ctx.rsu_paths.empty() && !ctx.cru_paths.empty();
    } catch (const std::exception&) {
        ctx.geometry_ok = false;
    }
    if (ctx.geometry_ok) {
        try {
            BoundConfig bc;
            bc.rsu_array = cfg.rsu_array;
            bc.cru_array = cfg.cru_array;
            bc.band_plan = cfg.band_plan;
            bc.signal = cfg.signal;
            bc.rsu = cfg.scene.rsu;
            bc.cru_position = position;
            ctx.bounds = evaluate_bounds(bc, ctx.rsu_paths, ctx.cru_paths);
            ctx.bounds_ok = true;
        } catch (const std::exception&) {
            ctx.bounds_ok = false;
        }
    }
    return ctx;
}

void run_trial_algorithm(const ExperimentConfig& cfg, const TrajectoryContext& ctx,
                         EstimatorId id, const Observation& rsu_obs, const Observation& cru_obs,
                         const Pose& assumed_rsu, double t_req, std::uint64_t trial_key,
                         ResultRecord& rec) {
    const arma::vec3 truth = ctx.cru_position;
    const double true_range = arma::norm(truth - cfg.scene.rsu.position);

    LosGate gate = cfg.gate;
    gate.receiver = assumed_rsu;
    gate.cru_height = truth(2);

    const EstimationResult response =
        estimate_response(id, rsu_obs, cfg, gate, rng::derive(trial_key, 31));
    const EstimationResult request = estimate_request(id, cru_obs, cfg);

    RttProtocol protocol;
    protocol.t_req = t_req;
    protocol.clock_bias = cfg.clock_bias;
    const double rtt = rtt_exchange(request.delays(request.los_index),
                                    response.delays(response.los_index), protocol);
    rec.range_err = std::abs(speed_of_light * (rtt - protocol.t_req) / 2.0 - true_range);

    const bool has_direction =
        !response.azimuths.is_empty() || !response.spatial_freqs.is_empty();
    if (!has_direction) {
        return;  // ranging-only configuration; no angles, no position
    }

    const arma::vec3 t_true =
        cfg.scene.rsu.global_to_body() * ((truth - cfg.scene.rsu.position) / true_range);
    const AzEl true_aoa = angles_from_direction(t_true);

    const AoaKind kind =
        response.azimuths.is_empty() ? AoaKind::SpatialFrequency : AoaKind::AzimuthElevation;
    arma::mat r0;
    if (cfg.noise.oracle) {
        if (!ctx.bounds_ok) {
            throw std::runtime_error("bound-based measurement covariance unavailable");
        }
        r0 = measurement_covariance(ctx.bounds.waa_cov, kind, true_aoa.azimuth,
                                    true_aoa.elevation);
    } else {
        r0 = arma::diagmat(cfg.noise.fixed_diag);
    }

    const RttMeasurement meas = assemble_measurement(response, request, protocol, r0);

    // Angle errors against the true body-frame arrival direction; linear
    // arrays are scored through the direction implied by the known height.
    if (kind == AoaKind::AzimuthElevation) {
        rec.az_err = std::abs(wrap_angle(meas.azimuth - true_aoa.azimuth));
        rec.el_err = std::abs(meas.elevation - true_aoa.elevation);
    } else {
        const AzEl implied =
            angles_from_direction(implied_direction(meas, cfg.scene.rsu, truth(2)));
        rec.az_err = std::abs(wrap_angle(implied.azimuth - true_aoa.azimuth));
        rec.el_err = std::abs(implied.elevation - true_aoa.elevation);
    }

    const arma::vec2 init = ls_initialize(meas, assumed_rsu, truth(2));
    const PositionFix fix = ml_position(meas, assumed_rsu, truth(2), init);
    rec.pos_err = std::hypot(fix.position(0) - truth(0), fix.position(1) - truth(1));
    rec.converged = fix.converged;
}

void run_sweep_point(const SweepPoint& pt, std::uint64_t config_hash,
                     const std::function<void(const ResultRecord&)>& sink) {
    const ExperimentConfig cfg = parse_experiment(pt.document);
    cfg.validate();

    std::vector<arma::vec3> positions;
    if (cfg.imported.active) {
        positions.push_back(cfg.imported.cru_position);
    } else {
        positions = cfg.trajectory.sample_positions();
    }

    for (arma::uword traj_idx = 0; traj_idx < positions.size(); ++traj_idx) {
        const TrajectoryContext ctx = prepare_point(cfg, positions[traj_idx]);
        for (arma::uword trial = 0; trial < cfg.n_trials; ++trial) {
            const std::uint64_t trial_key = rng::derive(
                rng::derive(rng::derive(cfg.base_seed, pt.id), traj_idx), trial);

            Pose assumed = cfg.scene.rsu;
            assumed.rotation(2) = wrap_angle(
                assumed.rotation(2) +
                cfg.heading_sigma * rng::normal(rng::derive(trial_key, 17), 0));

            bool observations_ok = false;
            Observation rsu_obs;
            Observation cru_obs;
            if (ctx.geometry_ok) {
                try {
                    rsu_obs = synthesize(ctx.rsu_paths, cfg.rsu_array, cfg.band_plan,
                                         cfg.signal, default_layout(cfg.rsu_array.kind()),
                                         rng::derive(trial_key, 11));
                    cru_obs = synthesize(ctx.cru_paths, cfg.cru_array, cfg.band_plan,
                                         cfg.signal, default_layout(cfg.cru_array.kind()),
                                         rng::derive(trial_key, 13));
                    observations_ok = true;
                } catch (const std::exception&) {
                    observations_ok = false;
                }
            }

            for (const EstimatorId id : cfg.algorithms) {
                ResultRecord rec;
                rec.sweep_id = pt.id;
                rec.traj_idx = traj_idx;
                rec.trial = trial;
                rec.algorithm = algorithm_name(id);
                rec.seed = trial_key;
                rec.config_hash = config_hash;
                if (ctx.bounds_ok) {
                    rec.peb_los = ctx.bounds.peb_los;
                    rec.peb_nlos = ctx.bounds.peb_nlos;
                    rec.peb_waa = ctx.bounds.peb_waa;
                }
                if (observations_ok) {
                    try {
                        run_trial_algorithm(cfg, ctx, id, rsu_obs, cru_obs, assumed,
                                            double(traj_idx) * cfg.measurement_cadence,
                                            trial_key, rec);
                    } catch (const std::exception&) {
                        rec.range_err = kInf;
                        rec.az_err = kInf;
                        rec.el_err = kInf;
                        rec.pos_err = kInf;
                        rec.converged = false;
                    }
                }
                sink(rec);
            }
        }
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

}  // namespace

std::string algorithm_name(EstimatorId id) {
    switch (id) {
    case EstimatorId::MatchedFilter:
        return "mf";
    case EstimatorId::Cpd:
        return "cpd";
    case EstimatorId::CpdSa:
        return "cpd_sa";
    case EstimatorId::Esprit2d:
        return "esprit_2d";
    case EstimatorId::Esprit2dSa:
        return "esprit_2d_sa";
    case EstimatorId::Esprit1d:
        return "esprit_1d";
    }
    throw std::logic_error("unhandled estimator");
}

EstimatorId algorithm_id(const std::string& name) {
    if (name == "mf") return EstimatorId::MatchedFilter;
    if (name == "cpd") return EstimatorId::Cpd;
    if (name == "cpd_sa") return EstimatorId::CpdSa;
    if (name == "esprit_2d") return EstimatorId::Esprit2d;
    if (name == "esprit_2d_sa") return EstimatorId::Esprit2dSa;
    if (name == "esprit_1d") return EstimatorId::Esprit1d;
    throw std::invalid_argument("unknown algorithm name: " + name);
}

void ExperimentConfig::validate() const {
    scene.validate();
    if (!imported.active) {
        trajectory.validate();
    }
    rsu_array.validate();
    cru_array.validate();
    if (cru_array.size() != 1) {
        throw std::invalid_argument("the vehicle end carries a single antenna");
    }
    band_plan.validate();
    signal.validate();
    if (algorithms.empty()) {
        throw std::invalid_argument("algorithm list is empty");
    }
    for (const EstimatorId id : algorithms) {
        check_algorithm(id, rsu_array);
    }
    if (n_trials < 1) {
        throw std::invalid_argument("n_trials must be at least 1");
    }
    if (heading_sigma < 0.0) {
        throw std::invalid_argument("heading sigma must be non-negative");
    }
    if (measurement_cadence < 0.0 || mf_tau_max <= 0.0) {
        throw std::invalid_argument("timing parameters must be positive");
    }
    if (!noise.oracle &&
        noise.fixed_diag.n_elem != observable_axes(rsu_array).n_elem + 1) {
        throw std::invalid_argument(
            "fixed measurement covariance diagonal must match the observation dimension");
    }
}

nlohmann::json default_experiment_json(const std::string& preset) {
    json doc;
    doc["scene"]["preset"] = preset;
    if (preset == "urban") {
        doc["scene"]["rsu"] = {{"position", {0.0, 0.0, 10.0}},
                               {"orientation_deg", {0.0, 0.0, 180.0}}};
        doc["scene"]["ground"] = {{"enabled", true}, {"loss", 0.4}};
        doc["scene"]["cru_height_m"] = 1.5;
        doc["scene"]["boxes"] = json::array();
        for (const double sx : {1.0, -1.0}) {
            for (const double sy : {1.0, -1.0}) {
                doc["scene"]["boxes"].push_back({{"center", {sx * 45.0, sy * 45.0}},
                                                 {"size", {50.0, 50.0}},
                                                 {"height_m", 30.0},
                                                 {"loss", 0.6}});
            }
        }
        doc["scene"]["reflectors"] = json::array();
        doc["trajectory"] = {{"waypoints", {{1.6, -70.0, 1.5}, {1.6, 70.0, 1.5}}},
                             {"speed_mps", 14.0},
                             {"sample_interval_s", 1.0}};
    } else if (preset == "highway") {
        doc["scene"]["rsu"] = {{"position", {0.0, 0.0, 5.0}},
                               {"orientation_deg", {0.0, 0.0, 90.0}}};
        doc["scene"]["ground"] = {{"enabled", true}, {"loss", 0.3}};
        doc["scene"]["cru_height_m"] = 1.5;
        doc["scene"]["boxes"] = json::array();
        doc["scene"]["reflectors"] = json::array();
        for (const double side : {1.0, -1.0}) {
            doc["scene"]["reflectors"].push_back({{"corner", {-380.0, side * 14.75, 0.0}},
                                                  {"edge", {400.0, 0.0}},
                                                  {"height_m", 0.75},
                                                  {"loss", 0.9}});
        }
        doc["trajectory"] = {{"waypoints", {{-360.0, -6.0, 1.5}, {0.0, -6.0, 1.5}}},
                             {"speed_mps", 36.0},
                             {"sample_interval_s", 1.0}};
    } else {
        throw std::invalid_argument("unknown scene preset: " + preset);
    }
    doc["rsu_array"] = {{"n_x", 4}, {"n_z", 2}, {"spacing_wavelengths", 0.5}};
    doc["cru_array"] = {{"n_x", 1}, {"n_z", 1}, {"spacing_wavelengths", 0.5}};
    doc["band_plan"] = {{"carriers_hz", {5.9e9}}, {"subcarriers", 167}, {"spacing_hz", 120.0e3}};
    doc["signal"] = {{"tx_power_dbm", 10.0},
                     {"n_ofdm_symbols", 12},
                     {"noise_psd_dbm_hz", -174.0},
                     {"noise_figure_db", 8.0}};
    doc["algorithms"] = {"mf", "cpd", "cpd_sa"};
    doc["n_trials"] = 100;
    doc["base_seed"] = 1;
    doc["heading_sigma_deg"] = 0.0;
    doc["clock_bias_s"] = 0.0;
    doc["measurement_cadence_s"] = 0.1;
    doc["mf_tau_max_s"] = 1.0e-6;
    doc["augmentation"] = {{"n_x", 2}, {"n_z", 1}};
    doc["los_gate"] = {{"enabled", true}, {"tolerance_m", 2.0}};
    doc["measurement_noise"] = {{"mode", "oracle"}};
    doc["sweeps"] = json::array();
    return doc;
}

nlohmann::json effective_experiment_json(const nlohmann::json& user) {
    std::string preset = "urban";
    if (user.contains("scene") && user["scene"].contains("preset")) {
        preset = user["scene"]["preset"].get<std::string>();
    }
    json doc = default_experiment_json(preset);
    doc.merge_patch(user);
    return doc;
}

ExperimentConfig parse_experiment(const nlohmann::json& effective) {
    ExperimentConfig cfg;
    const json& scene = effective.at("scene");

    const json& bp = effective.at("band_plan");
    cfg.band_plan.carriers = arma::vec(bp.at("carriers_hz").get<std::vector<double>>());
    cfg.band_plan.subcarriers = bp.at("subcarriers").get<arma::uword>();
    cfg.band_plan.spacing = bp.at("spacing_hz").get<double>();
    cfg.band_plan.validate();
    const double lambda = cfg.band_plan.wavelength();

    cfg.scene.rsu.position = read_vec3(scene.at("rsu").at("position"), "scene.rsu.position");
    const arma::vec3 orientation =
        read_vec3(scene.at("rsu").at("orientation_deg"), "scene.rsu.orientation_deg");
    cfg.scene.rsu.rotation = {deg2rad(orientation(0)), deg2rad(orientation(1)),
                              deg2rad(orientation(2))};
    cfg.scene.has_ground = scene.at("ground").at("enabled").get<bool>();
    cfg.scene.ground_loss = scene.at("ground").at("loss").get<double>();
    cfg.scene.cru_height = scene.at("cru_height_m").get<double>();
    for (const json& r : scene.value("reflectors", json::array())) {
        Reflector ref;
        ref.corner = read_vec3(r.at("corner"), "reflector corner");
        const json& edge = r.at("edge");
        ref.horizontal = {edge.at(0).get<double>(), edge.at(1).get<double>()};
        ref.height = r.at("height_m").get<double>();
        ref.loss = r.at("loss").get<double>();
        cfg.scene.reflectors.push_back(ref);
    }
    for (const json& b : scene.value("boxes", json::array())) {
        const json& center = b.at("center");
        const json& size = b.at("size");
        add_box(cfg.scene, center.at(0).get<double>(), center.at(1).get<double>(),
                size.at(0).get<double>(), size.at(1).get<double>(),
                b.at("height_m").get<double>(), b.at("loss").get<double>());
    }
    cfg.scene.validate();

    if (scene.contains("import")) {
        const json& imp = scene.at("import");
        cfg.imported.active = true;
        cfg.imported.rsu_paths = import_paths(imp.at("rsu_paths_csv").get<std::string>());
        cfg.imported.cru_paths = import_paths(imp.at("cru_paths_csv").get<std::string>());
        cfg.imported.cru_position = read_vec3(imp.at("cru_position"), "import cru_position");
    } else {
        const json& traj = effective.at("trajectory");
        const auto rows = traj.at("waypoints").get<std::vector<std::vector<double>>>();
        if (rows.empty()) {
            throw std::invalid_argument("trajectory needs at least one waypoint");
        }
        cfg.trajectory.waypoints.set_size(rows.size(), 3);
        for (arma::uword i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != 3) {
                throw std::invalid_argument("trajectory waypoints must have three coordinates");
            }
            cfg.trajectory.waypoints.row(i) =
                arma::rowvec{rows[i][0], rows[i][1], rows[i][2]};
        }
        cfg.trajectory.speed = traj.at("speed_mps").get<double>();
        cfg.trajectory.sample_interval = traj.at("sample_interval_s").get<double>();
        cfg.trajectory.validate();
    }

    cfg.rsu_array = parse_array(effective.at("rsu_array"), lambda);
    cfg.cru_array = parse_array(effective.at("cru_array"), lambda);
    if (cfg.rsu_array.n_x == 1 && cfg.rsu_array.n_z > 1) {
        throw std::invalid_argument("linear anchor arrays must extend along the x axis");
    }

    const json& sig = effective.at("signal");
    cfg.signal.tx_power = dbm_to_watt(sig.at("tx_power_dbm").get<double>());
    cfg.signal.n_ofdm_symbols = sig.at("n_ofdm_symbols").get<arma::uword>();
    cfg.signal.noise_psd = dbm_to_watt(sig.at("noise_psd_dbm_hz").get<double>());
    cfg.signal.noise_figure = db_to_linear(sig.at("noise_figure_db").get<double>());
    cfg.signal.validate();

    for (const json& name : effective.at("algorithms")) {
        cfg.algorithms.push_back(algorithm_id(name.get<std::string>()));
    }

    cfg.n_trials = effective.at("n_trials").get<arma::uword>();
    cfg.base_seed = effective.at("base_seed").get<std::uint64_t>();
    cfg.heading_sigma = deg2rad(effective.at("heading_sigma_deg").get<double>());
    cfg.clock_bias = effective.at("clock_bias_s").get<double>();
    cfg.measurement_cadence = effective.at("measurement_cadence_s").get<double>();
    cfg.mf_tau_max = effective.at("mf_tau_max_s").get<double>();
    cfg.augmentation.n_x = effective.at("augmentation").at("n_x").get<arma::uword>();
    cfg.augmentation.n_z = effective.at("augmentation").at("n_z").get<arma::uword>();
    cfg.gate.enabled = effective.at("los_gate").at("enabled").get<bool>();
    cfg.gate.tolerance = effective.at("los_gate").at("tolerance_m").get<double>();

    const json& noise = effective.at("measurement_noise");
    const std::string mode = noise.at("mode").get<std::string>();
    if (mode == "oracle") {
        cfg.noise.oracle = true;
    } else if (mode == "fixed") {
        cfg.noise.oracle = false;
        cfg.noise.fixed_diag = arma::vec(noise.at("diag").get<std::vector<double>>());
    } else {
        throw std::invalid_argument("measurement_noise.mode must be 'oracle' or 'fixed'");
    }
    return cfg;
}

std::vector<SweepPoint> expand_sweeps(const nlohmann::json& effective) {
    const json axes = effective.value("sweeps", json::array());
    std::vector<SweepPoint> points;
    if (axes.empty()) {
        points.push_back({0, effective});
        return points;
    }
    std::vector<std::string> paths;
    std::vector<json> values;
    arma::uword total = 1;
    for (const json& axis : axes) {
        const std::string parameter = axis.at("parameter").get<std::string>();
        const json vals = axis.at("values");
        if (!vals.is_array() || vals.empty()) {
            throw std::invalid_argument("sweep axis '" + parameter + "' needs a value list");
        }
        paths.push_back(parameter);
        values.push_back(vals);
        total *= vals.size();
    }
    for (arma::uword id = 0; id < total; ++id) {
        json doc = effective;
        arma::uword rest = id;
        // First axis varies slowest so sweep ids group naturally.
        for (arma::uword a = paths.size(); a-- > 0;) {
            const arma::uword n = values[a].size();
            const arma::uword pick = rest % n;
            rest /= n;
            std::string pointer = "/" + paths[a];
            std::replace(pointer.begin(), pointer.end(), '.', '/');
            doc[json::json_pointer(pointer)] = values[a][pick];
        }
        points.push_back({id, doc});
    }
    return points;
}

std::uint64_t document_hash(const nlohmann::json& doc) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : doc.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string results_csv_header() {
    return "sweep_id,traj_idx,trial,algorithm,range_err_m,az_err_rad,el_err_rad,pos_err_m,"
           "converged,peb_los_m,peb_nlos_m,peb_waa_m";
}

std::string to_csv_row(const ResultRecord& r) {
    std::ostringstream out;
    out << r.sweep_id << ',' << r.traj_idx << ',' << r.trial << ',' << r.algorithm << ','
        << format_double(r.range_err) << ',' << format_double(r.az_err) << ','
        << format_double(r.el_err) << ',' << format_double(r.pos_err) << ','
        << (r.converged ? 1 : 0) << ',' << format_double(r.peb_los) << ','
        << format_double(r.peb_nlos) << ',' << format_double(r.peb_waa);
    return out.str();
}

std::vector<ResultRecord> read_results_csv(std::istream& in) {
    std::vector<ResultRecord> records;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("results file is empty");
    }
    if (split_csv_line(line) != split_csv_line(results_csv_header())) {
        throw std::runtime_error("results file header does not match the schema");
    }
    arma::uword row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 12) {
            throw std::runtime_error("row " + std::to_string(row) + ": expected 12 columns");
        }
        try {
            ResultRecord r;
            r.sweep_id = std::stoull(f[0]);
            r.traj_idx = std::stoull(f[1]);
            r.trial = std::stoull(f[2]);
            r.algorithm = f[3];
            r.range_err = std::stod(f[4]);
            r.az_err = std::stod(f[5]);
            r.el_err = std::stod(f[6]);
            r.pos_err = std::stod(f[7]);
            r.converged = f[8] == "1";
            r.peb_los = std::stod(f[9]);
            r.peb_nlos = std::stod(f[10]);
            r.peb_waa = std::stod(f[11]);
            records.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::runtime_error("row " + std::to_string(row) + ": malformed number");
        }
    }
    return records;
}

void run_experiment(const nlohmann::json& user_config,
                    const std::function<void(const ResultRecord&)>& sink) {
    const json effective = effective_experiment_json(user_config);
    const std::uint64_t config_hash = document_hash(effective);
    for (const SweepPoint& pt : expand_sweeps(effective)) {
        run_sweep_point(pt, config_hash, sink);
    }
}

void summarize(const std::vector<ResultRecord>& records, std::ostream& rmse_csv,
               std::ostream& cdf_csv) {
    if (records.empty()) {
        throw std::invalid_argument("no records to summarize");
    }

    struct Accum {
        arma::uword n = 0;
        arma::uword n_failed = 0;
        double range2 = 0.0, az2 = 0.0, el2 = 0.0, pos2 = 0.0;
    };
    std::map<std::tuple<arma::uword, arma::uword, std::string>, Accum> groups;
    for (const ResultRecord& r : records) {
        Accum& a = groups[{r.sweep_id, r.traj_idx, r.algorithm}];
        a.n += 1;
        a.n_failed += r.converged ? 0 : 1;
        a.range2 += r.range_err * r.range_err;
        a.az2 += r.az_err * r.az_err;
        a.el2 += r.el_err * r.el_err;
        a.pos2 += r.pos_err * r.pos_err;
    }
    rmse_csv << "sweep_id,traj_idx,algorithm,n,n_failed,range_rmse_m,az_rmse_rad,"
                "el_rmse_rad,pos_rmse_m\n";
    for (const auto& [key, a] : groups) {
        const double n = static_cast<double>(a.n);
        rmse_csv << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key)
                 << ',' << a.n << ',' << a.n_failed << ','
                 << format_double(std::sqrt(a.range2 / n)) << ','
                 << format_double(std::sqrt(a.az2 / n)) << ','
                 << format_double(std::sqrt(a.el2 / n)) << ','
                 << format_double(std::sqrt(a.pos2 / n)) << '\n';
    }

    std::map<std::pair<arma::uword, std::string>,
             std::array<std::vector<double>, 4>> pools;
    for (const ResultRecord& r : records) {
        auto& pool = pools[{r.sweep_id, r.algorithm}];
        pool[0].push_back(r.range_err);
        pool[1].push_back(r.az_err);
        pool[2].push_back(r.el_err);
        pool[3].push_back(r.pos_err);
    }
    const std::array<std::string, 4> metric_names{"range_err_m", "az_err_rad", "el_err_rad",
                                                  "pos_err_m"};
    cdf_csv << "sweep_id,algorithm,metric,quantile,value\n";
    for (auto& [key, pool] : pools) {
        for (arma::uword m = 0; m < 4; ++m) {
            std::vector<double>& v = pool[m];
            std::sort(v.begin(), v.end());
            for (int pct = 1; pct <= 100; ++pct) {
                const double p = pct / 100.0;
                const auto idx = static_cast<std::size_t>(
                    std::ceil(p * static_cast<double>(v.size()) - 1e-12)) - 1;
                char q[8];
                std::snprintf(q, sizeof q, "%.2f", p);
                cdf_csv << key.first << ',' << key.second << ',' << metric_names[m] << ','
                        << q << ',' << format_double(v[std::min(idx, v.size() - 1)]) << '\n';
            }
        }
    }
}

}  // namespace sidelink
