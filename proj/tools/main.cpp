// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Command line front end: scene simulation, single-shot estimation,
// bound evaluation, Monte Carlo experiment runs, and result summaries.
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

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sidelink/bounds.hpp"
#include "sidelink/common.hpp"
#include "sidelink/estimators.hpp"
#include "sidelink/harness.hpp"
#include "sidelink/positioning.hpp"
#include "sidelink/scene.hpp"
#include "sidelink/waveform.hpp"

namespace {

using nlohmann::json;
using namespace sidelink;

json load_user_config(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    return json::parse(in);
}

json vec_to_json(const arma::vec& v) {
    json out = json::array();
    for (const double x : v) {
        out.push_back(x);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    out << text;
}

arma::vec3 trajectory_position(const ExperimentConfig& cfg, arma::uword traj_idx) {
    if (cfg.imported.active) {
        if (traj_idx != 0) {
            throw std::invalid_argument("imported geometry has a single position (index 0)");
        }
        return cfg.imported.cru_position;
    }
    const std::vector<arma::vec3> positions = cfg.trajectory.sample_positions();
    if (traj_idx >= positions.size()) {
        throw std::invalid_argument("trajectory index out of range (have " +
                                    std::to_string(positions.size()) + " samples)");
    }
    return positions[traj_idx];
}

int cmd_simulate(const std::string& config_path, arma::uword traj_idx,
                 const std::string& rsu_out, const std::string& cru_out) {
    const ExperimentConfig cfg =
        parse_experiment(effective_experiment_json(load_user_config(config_path)));
    cfg.validate();
    const arma::vec3 position = trajectory_position(cfg, traj_idx);
    const double lambda = cfg.band_plan.wavelength();
    export_paths(rsu_out, generate_paths(cfg.scene, position, ReceiverEnd::AtRsu, lambda));
    export_paths(cru_out, generate_paths(cfg.scene, position, ReceiverEnd::AtCru, lambda));
    std::cerr << "wrote " << rsu_out << " and " << cru_out << " for position ["
              << position(0) << ", " << position(1) << ", " << position(2) << "]\n";
    return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& algorithm,
                 arma::uword traj_idx, arma::uword trial, const std::string& out_path) {
    const ExperimentConfig cfg =
        parse_experiment(effective_experiment_json(load_user_config(config_path)));
    cfg.validate();
    const EstimatorId id = algorithm_id(algorithm);
    const arma::vec3 position = trajectory_position(cfg, traj_idx);

    PathList paths;
    if (cfg.imported.active) {
        paths = cfg.imported.rsu_paths;
    } else {
        paths = generate_paths(cfg.scene, position, ReceiverEnd::AtRsu,
                               cfg.band_plan.wavelength());
    }
    const std::uint64_t trial_key =
        rng::derive(rng::derive(rng::derive(cfg.base_seed, 0), traj_idx), trial);
    const Observation obs =
        synthesize(paths, cfg.rsu_array, cfg.band_plan, cfg.signal,
                   default_layout(cfg.rsu_array.kind()), rng::derive(trial_key, 11));

    LosGate gate = cfg.gate;
    gate.receiver = cfg.scene.rsu;
    gate.cru_height = position(2);

    EstimationResult r;
    switch (id) {
    case EstimatorId::MatchedFilter: {
        const arma::vec grid = default_delay_grid(cfg.band_plan, cfg.mf_tau_max);
        if (cfg.rsu_array.kind() == ArrayKind::Ura) {
            r = mf_ura(obs, grid);
        } else if (cfg.rsu_array.kind() == ArrayKind::Ula) {
            r = mf_ula(obs, grid);
        } else {
            r = mf_delay(obs, grid);
        }
        break;
    }
    case EstimatorId::Cpd:
        r = cpd_estimate(obs, 0, rng::derive(trial_key, 31), gate);
        break;
    case EstimatorId::CpdSa:
        r = cpd_sa(obs, cfg.augmentation, 0, rng::derive(trial_key, 31), gate);
        break;
    case EstimatorId::Esprit2d:
        r = esprit_2d(obs);
        break;
    case EstimatorId::Esprit2dSa:
        r = esprit_2d_sa(obs, cfg.augmentation);
        break;
    case EstimatorId::Esprit1d:
        r = esprit_1d(obs);
        break;
    }

    json doc;
    doc["algorithm"] = algorithm_name(id);
    doc["traj_idx"] = traj_idx;
    doc["trial"] = trial;
    doc["delays_s"] = vec_to_json(r.delays);
    doc["azimuths_rad"] = vec_to_json(r.azimuths);
    doc["elevations_rad"] = vec_to_json(r.elevations);
    doc["spatial_freqs"] = vec_to_json(r.spatial_freqs);
    doc["model_order"] = r.model_order;
    doc["los_index"] = r.los_index;
    doc["los_spatial_freq"] = r.los_spatial_freq;
    doc["peak_to_mean"] = r.peak_to_mean;
    doc["los_gate_fallback"] = r.los_gate_fallback;
    write_text(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_bound(const std::string& config_path, arma::uword traj_idx,
              const std::string& out_path) {
    const ExperimentConfig cfg =
        parse_experiment(effective_experiment_json(load_user_config(config_path)));
    cfg.validate();
    const arma::vec3 position = trajectory_position(cfg, traj_idx);

    PathList rsu_paths;
    PathList cru_paths;
    if (cfg.imported.active) {
        rsu_paths = cfg.imported.rsu_paths;
        cru_paths = cfg.imported.cru_paths;
    } else {
        const double lambda = cfg.band_plan.wavelength();
        rsu_paths = generate_paths(cfg.scene, position, ReceiverEnd::AtRsu, lambda);
        cru_paths = generate_paths(cfg.scene, position, ReceiverEnd::AtCru, lambda);
    }

    BoundConfig bc;
    bc.rsu_array = cfg.rsu_array;
    bc.cru_array = cfg.cru_array;
    bc.band_plan = cfg.band_plan;
    bc.signal = cfg.signal;
    bc.rsu = cfg.scene.rsu;
    bc.cru_position = position;
    const BoundReport report = evaluate_bounds(bc, rsu_paths, cru_paths);

    json doc;
    doc["traj_idx"] = traj_idx;
    doc["position"] = {position(0), position(1), position(2)};
    doc["n_paths_rsu"] = rsu_paths.size();
    doc["n_paths_cru"] = cru_paths.size();
    doc["peb_los_m"] = report.peb_los;
    doc["peb_nlos_m"] = report.peb_nlos;
    doc["peb_waa_m"] = report.peb_waa;
    doc["sigma_toa_s2"] = report.sigma_toa;
    doc["channel_crb_diag"] = vec_to_json(report.channel_crb);
    doc["bias"] = vec_to_json(report.bias);
    write_text(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            std::string meta_path) {
    const json user = load_user_config(config_path);
    const json effective = effective_experiment_json(user);

    if (meta_path.empty()) {
        meta_path = out_path + ".meta.json";
    }
    {
        char hash_hex[32];
        std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                      static_cast<unsigned long long>(document_hash(effective)));
        json meta;
        meta["config_hash"] = hash_hex;
        meta["effective_config"] = effective;
        std::ofstream meta_out(meta_path);
        if (!meta_out) {
            throw std::runtime_error("cannot open output file: " + meta_path);
        }
        meta_out << meta.dump(2) << "\n";
    }

    std::ofstream out(out_path);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + out_path);
    }
    out << results_csv_header() << "\n";
    arma::uword rows = 0;
    // Flush per record so an aborted run still leaves a readable file.
    run_experiment(user, [&](const ResultRecord& rec) {
        out << to_csv_row(rec) << "\n";
        out.flush();
        ++rows;
    });
    std::cerr << "wrote " << rows << " records to " << out_path << "\n";
    return 0;
}

int cmd_summarize(const std::string& results_path, const std::string& rmse_path,
                  const std::string& cdf_path) {
    std::ifstream in(results_path);
    if (!in) {
        throw std::invalid_argument("cannot open results file: " + results_path);
    }
    const std::vector<ResultRecord> records = read_results_csv(in);
    std::ofstream rmse_out(rmse_path);
    std::ofstream cdf_out(cdf_path);
    if (!rmse_out || !cdf_out) {
        throw std::runtime_error("cannot open summary output files");
    }
    summarize(records, rmse_out, cdf_out);
    std::cerr << "summarized " << records.size() << " records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sidelink round-trip positioning simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string algorithm = "cpd_sa";
    std::string out_path;
    std::string rsu_out = "rsu_paths.csv";
    std::string cru_out = "cru_paths.csv";
    std::string results_path;
    std::string rmse_path = "rmse.csv";
    std::string cdf_path = "cdf.csv";
    std::string meta_path;
    arma::uword traj_idx = 0;
    arma::uword trial = 0;

    CLI::App* simulate = app.add_subcommand("simulate", "Export propagation paths to CSV");
    simulate->add_option("--config", config_path, "Experiment config JSON");
    simulate->add_option("--traj-index", traj_idx, "Trajectory sample index");
    simulate->add_option("--rsu-out", rsu_out, "Anchor-side path CSV");
    simulate->add_option("--cru-out", cru_out, "Vehicle-side path CSV");

    CLI::App* estimate =
        app.add_subcommand("estimate", "Run one estimator on one synthesized snapshot");
    estimate->add_option("--config", config_path, "Experiment config JSON");
    estimate->add_option("--algorithm", algorithm, "mf|cpd|cpd_sa|esprit_2d|esprit_2d_sa|esprit_1d");
    estimate->add_option("--traj-index", traj_idx, "Trajectory sample index");
    estimate->add_option("--trial", trial, "Trial index (noise realization)");
    estimate->add_option("--out", out_path, "Output JSON path (default stdout)");

    CLI::App* bound = app.add_subcommand("bound", "Evaluate position error bounds");
    bound->add_option("--config", config_path, "Experiment config JSON");
    bound->add_option("--traj-index", traj_idx, "Trajectory sample index");
    bound->add_option("--out", out_path, "Output JSON path (default stdout)");

    CLI::App* run = app.add_subcommand("run", "Run the configured Monte Carlo experiment");
    run->add_option("--config", config_path, "Experiment config JSON");
    run->add_option("--out", results_path, "Results CSV path")->required();
    run->add_option("--meta", meta_path, "Metadata JSON path (default <out>.meta.json)");

    CLI::App* summ = app.add_subcommand("summarize", "Aggregate a results CSV");
    summ->add_option("--results", results_path, "Results CSV path")->required();
    summ->add_option("--rmse", rmse_path, "RMSE summary CSV path");
    summ->add_option("--cdf", cdf_path, "Quantile summary CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(config_path, traj_idx, rsu_out, cru_out);
        }
        if (estimate->parsed()) {
            return cmd_estimate(config_path, algorithm, traj_idx, trial, out_path);
        }
        if (bound->parsed()) {
            return cmd_bound(config_path, traj_idx, out_path);
        }
        if (run->parsed()) {
            return cmd_run(config_path, results_path, meta_path);
        }
        if (summ->parsed()) {
            return cmd_summarize(results_path, rmse_path, cdf_path);
        }
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
