// SPDX-License-Identifier: Apache-2.0
//
// sidelink-sim
// Experiment orchestration: JSON-configured scenarios, parameter sweeps,
// Monte Carlo trials over trajectories and noise realizations, results
// persistence, and summary statistics.
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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sidelink/bounds.hpp"
#include "sidelink/estimators.hpp"
#include "sidelink/positioning.hpp"
#include "sidelink/scene.hpp"

namespace sidelink {

// Stable names used in configuration files and result rows.
std::string algorithm_name(EstimatorId id);
EstimatorId algorithm_id(const std::string& name);

struct MeasurementNoiseConfig {
    bool oracle = true;    // covariance from the bound at the true geometry
    arma::vec fixed_diag;  // otherwise a diagonal in observation coordinates
};

// Fixed path lists substituting for the scene simulator; one geometry
// snapshot with a known true receiver position.
struct ImportedGeometry {
    bool active = false;
    PathList rsu_paths;
    PathList cru_paths;
    arma::vec3 cru_position{arma::fill::zeros};
};

struct ExperimentConfig {
    Scene scene;
    Trajectory trajectory;
    ArrayConfig rsu_array;
    ArrayConfig cru_array;
    BandPlan band_plan;
    SignalConfig signal;
    std::vector<EstimatorId> algorithms;
    arma::uword n_trials = 100;
    std::uint64_t base_seed = 1;
    double heading_sigma = 0.0;        // rad, std of the assumed-yaw error
    double clock_bias = 0.0;           // s, receiver clock minus anchor clock
    double measurement_cadence = 0.1;  // s between ranging rounds
    double mf_tau_max = 1e-6;          // matched-filter search horizon, s
    AugmentationConfig augmentation{2, 1};
    LosGate gate;
    MeasurementNoiseConfig noise;
    ImportedGeometry imported;

    void validate() const;
};

// Complete default document for a named scene preset ("urban", "highway").
nlohmann::json default_experiment_json(const std::string& preset);

// Preset defaults patched with the user document (angles in degrees and
// powers in dBm at this boundary only).
nlohmann::json effective_experiment_json(const nlohmann::json& user);

// Typed view of an effective document; ignores the sweep section.
ExperimentConfig parse_experiment(const nlohmann::json& effective);

// One fully resolved configuration per point of the cartesian product of
// the sweep axes (a single point when no sweep is declared). Axis values
// are written into the document at their dotted parameter paths.
struct SweepPoint {
    arma::uword id = 0;
    nlohmann::json document;
};
std::vector<SweepPoint> expand_sweeps(const nlohmann::json& effective);

struct ResultRecord {
    arma::uword sweep_id = 0;
    arma::uword traj_idx = 0;
    arma::uword trial = 0;
    std::string algorithm;
    double range_err = std::numeric_limits<double>::infinity();  // m
    double az_err = std::numeric_limits<double>::infinity();     // rad
    double el_err = std::numeric_limits<double>::infinity();     // rad
    double pos_err = std::numeric_limits<double>::infinity();    // m
    bool converged = false;
    double peb_los = std::numeric_limits<double>::infinity();   // m
    double peb_nlos = std::numeric_limits<double>::infinity();  // m
    double peb_waa = std::numeric_limits<double>::infinity();   // m
    // Provenance, carried on the record but not part of the CSV schema.
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

// FNV-1a over the canonical dump; stable across runs and platforms.
std::uint64_t document_hash(const nlohmann::json& doc);

std::string results_csv_header();
std::string to_csv_row(const ResultRecord& record);
std::vector<ResultRecord> read_results_csv(std::istream& in);

// Runs every sweep point x trajectory sample x trial x algorithm and
// feeds records to the sink in that deterministic order. Module errors
// inside a trial produce a sentinel record (converged 0, infinite
// errors); configuration errors throw.
void run_experiment(const nlohmann::json& user_config,
                    const std::function<void(const ResultRecord&)>& sink);

// RMSE per (sweep point, trajectory index, algorithm) and empirical CDF
// quantiles at 1% steps per (sweep point, algorithm). Throws
// std::invalid_argument on an empty record set.
void summarize(const std::vector<ResultRecord>& records, std::ostream& rmse_csv,
               std::ostream& cdf_csv);

}  // namespace sidelink
