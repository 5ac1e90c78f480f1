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

#include "sidelink/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sidelink {

// ---------- SCENE VALIDATION ----------

arma::vec3 Reflector::normal() const {
    const arma::vec3 n = arma::cross(edge_u(), edge_v());
    const double len = arma::norm(n);
    if (len < 1e-12)
        throw std::invalid_argument("Reflector: degenerate surface");
    return n / len;
}

void Reflector::validate() const {
    if (!(height > 0.0))
        throw std::invalid_argument("Reflector: height must be > 0");
    if (arma::norm(horizontal) < 1e-12)
        throw std::invalid_argument("Reflector: horizontal edge must be non-zero");
    if (!(loss >= 0.0 && loss <= 1.0))
        throw std::invalid_argument("Reflector: loss must be in [0, 1]");
}

void Scene::validate() const {
    for (const auto& r : reflectors)
        r.validate();
    if (!(ground_loss >= 0.0 && ground_loss <= 1.0))
        throw std::invalid_argument("Scene: ground_loss must be in [0, 1]");
    if (!(cru_height > 0.0))
        throw std::invalid_argument("Scene: cru_height must be > 0");
}

void add_box(Scene& scene, double cx, double cy, double sx, double sy, double height,
             double loss) {
    const double x0 = cx - sx / 2, x1 = cx + sx / 2;
    const double y0 = cy - sy / 2, y1 = cy + sy / 2;
    scene.reflectors.push_back({{x0, y0, 0.0}, {sx, 0.0}, height, loss});  // south
    scene.reflectors.push_back({{x0, y1, 0.0}, {sx, 0.0}, height, loss});  // north
    scene.reflectors.push_back({{x0, y0, 0.0}, {0.0, sy}, height, loss});  // west
    scene.reflectors.push_back({{x1, y0, 0.0}, {0.0, sy}, height, loss});  // east
}

// ---------- TRAJECTORY ----------

void Trajectory::validate() const {
    if (waypoints.n_rows < 1 || waypoints.n_cols != 3)
        throw std::invalid_argument("Trajectory: waypoints must be an n x 3 matrix, n >= 1");
    if (!(speed > 0.0) || !(sample_interval > 0.0))
        throw std::invalid_argument("Trajectory: speed and sample_interval must be > 0");
}

std::vector<arma::vec3> Trajectory::sample_positions() const {
    validate();
    std::vector<arma::vec3> out;
    // Cumulative arc length of the polyline.
    arma::vec cum(waypoints.n_rows, arma::fill::zeros);
    for (arma::uword i = 1; i < waypoints.n_rows; ++i)
        cum(i) = cum(i - 1) + arma::norm(waypoints.row(i) - waypoints.row(i - 1));
    const double total = cum(cum.n_elem - 1);

    const double step = speed * sample_interval;
    for (double s = 0.0; s <= total + 1e-9; s += step) {
        const double sc = std::min(s, total);
        arma::uword seg = 1;
        while (seg < waypoints.n_rows - 1 && cum(seg) < sc)
            ++seg;
        if (waypoints.n_rows == 1) {
            out.push_back(waypoints.row(0).t());
            break;
        }
        const double seg_len = cum(seg) - cum(seg - 1);
        const double f = (seg_len > 0.0) ? (sc - cum(seg - 1)) / seg_len : 0.0;
        const arma::vec3 p = waypoints.row(seg - 1).t() +
                             f * (waypoints.row(seg).t() - waypoints.row(seg - 1).t());
        out.push_back(p);
        if (step <= 0.0)
            break;
    }
    return out;
}

// ---------- OCCLUSION AND IMAGE GEOMETRY ----------

namespace {

// Signed distance of p from the reflector plane.
double plane_offset(const Reflector& r, const arma::vec3& p) {
    return arma::dot(r.normal(), p - r.corner);
}

// True when p lies on the reflector surface (on the plane, inside the bounds).
bool on_surface(const Reflector& r, const arma::vec3& p) {
    if (std::abs(plane_offset(r, p)) > 1e-9)
        return false;
    const arma::vec3 d = p - r.corner;
    const arma::vec3 u = r.edge_u();
    const double su = arma::dot(d, u) / arma::dot(u, u);
    const double sv = d(2) / r.height;
    return su >= -1e-9 && su <= 1.0 + 1e-9 && sv >= -1e-9 && sv <= 1.0 + 1e-9;
}

// True when the open segment a->b crosses the reflector's rectangle.
// Endpoint touches do not count; parallel segments never block.
bool segment_hits(const Reflector& r, const arma::vec3& a, const arma::vec3& b) {
    const arma::vec3 n = r.normal();
    const double da = arma::dot(n, a - r.corner);
    const double db = arma::dot(n, b - r.corner);
    if (std::abs(da - db) < 1e-15)
        return false; // parallel
    const double t = da / (da - db);
    if (t <= 1e-9 || t >= 1.0 - 1e-9)
        return false;
    const arma::vec3 p = a + t * (b - a);
    const arma::vec3 d = p - r.corner;
    const arma::vec3 u = r.edge_u();
    const double su = arma::dot(d, u) / arma::dot(u, u);
    const double sv = d(2) / r.height;
    return su >= -1e-9 && su <= 1.0 + 1e-9 && sv >= -1e-9 && sv <= 1.0 + 1e-9;
}

// True when any reflector other than `skip` blocks the open segment a->b.
bool blocked(const Scene& scene, const arma::vec3& a, const arma::vec3& b,
             std::ptrdiff_t skip = -1) {
    for (std::size_t i = 0; i < scene.reflectors.size(); ++i) {
        if (std::ptrdiff_t(i) == skip)
            continue;
        if (segment_hits(scene.reflectors[i], a, b))
            return true;
    }
    return false;
}

std::complex<double> free_space_gain(double distance, double wavelength, double loss) {
    const double amp = loss * wavelength / (4.0 * pi * distance);
    const double phase = -2.0 * pi * distance / wavelength;
    return std::polar(amp, phase);
}

PathParam make_path(const Pose& rx_pose, const arma::vec3& incidence_point, double distance,
                    double wavelength, double loss, bool is_los) {
    const arma::vec3 t = local_arrival_direction(rx_pose, incidence_point);
    const AzEl ae = angles_from_direction(t);
    PathParam p;
    p.gain = free_space_gain(distance, wavelength, loss);
    p.delay = distance / speed_of_light;
    p.azimuth = ae.azimuth;
    p.elevation = ae.elevation;
    p.is_los = is_los;
    return p;
}

} // namespace

PathList generate_paths(const Scene& scene, const arma::vec3& cru_position, ReceiverEnd end,
                        double wavelength) {
    scene.validate();
    if (!(wavelength > 0.0))
        throw std::invalid_argument("generate_paths: wavelength must be > 0");

    const arma::vec3 rsu_pos = scene.rsu.position;
    if (arma::norm(cru_position - rsu_pos) < 1e-9)
        throw std::invalid_argument("generate_paths: CRU coincides with RSU");

    const bool at_rsu = (end == ReceiverEnd::AtRsu);
    const arma::vec3 tx = at_rsu ? cru_position : rsu_pos;
    const Pose rx_pose = at_rsu ? scene.rsu : Pose{cru_position, {0.0, 0.0, 0.0}};
    const arma::vec3 rx = rx_pose.position;

    for (const auto& r : scene.reflectors)
        if (on_surface(r, tx) || on_surface(r, rx))
            throw std::invalid_argument("generate_paths: link end point lies on a reflector");

    PathList paths;

    // Direct path.
    if (!blocked(scene, tx, rx))
        paths.push_back(make_path(rx_pose, tx, arma::norm(tx - rx), wavelength, 1.0, true));

    // One specular bounce per reflector (image method).
    for (std::size_t i = 0; i < scene.reflectors.size(); ++i) {
        const Reflector& r = scene.reflectors[i];
        const arma::vec3 n = r.normal();
        const double d_tx = plane_offset(r, tx);
        const double d_rx = plane_offset(r, rx);
        if (d_tx * d_rx <= 1e-12)
            continue; // reflection requires both ends strictly on one side
        const arma::vec3 image = tx - 2.0 * d_tx * n;
        const double denom = arma::dot(n, image - rx);
        if (std::abs(denom) < 1e-15)
            continue;
        const double t = arma::dot(n, r.corner - rx) / denom;
        if (t <= 1e-9 || t >= 1.0 - 1e-9)
            continue;
        const arma::vec3 ip = rx + t * (image - rx);
        const arma::vec3 d = ip - r.corner;
        const arma::vec3 u = r.edge_u();
        const double su = arma::dot(d, u) / arma::dot(u, u);
        const double sv = d(2) / r.height;
        if (su < 0.0 || su > 1.0 || sv < 0.0 || sv > 1.0)
            continue; // specular point misses the rectangle
        if (blocked(scene, tx, ip, std::ptrdiff_t(i)) || blocked(scene, ip, rx, std::ptrdiff_t(i)))
            continue;
        const double dist = arma::norm(image - rx);
        paths.push_back(make_path(rx_pose, ip, dist, wavelength, r.loss, false));
    }

    // Ground bounce (horizontal mirror at z = 0).
    if (scene.has_ground && tx(2) > 0.0 && rx(2) > 0.0) {
        const arma::vec3 image = {tx(0), tx(1), -tx(2)};
        const double denom = image(2) - rx(2);
        if (std::abs(denom) > 1e-15) {
            const double t = -rx(2) / denom;
            if (t > 1e-9 && t < 1.0 - 1e-9) {
                const arma::vec3 ip = rx + t * (image - rx);
                if (!blocked(scene, tx, ip) && !blocked(scene, ip, rx)) {
                    const double dist = arma::norm(image - rx);
                    paths.push_back(
                        make_path(rx_pose, ip, dist, wavelength, scene.ground_loss, false));
                }
            }
        }
    }

    std::stable_sort(paths.begin(), paths.end(), [](const PathParam& a, const PathParam& b) {
        if (a.is_los != b.is_los)
            return a.is_los; // direct path first
        return a.delay < b.delay;
    });
    return paths;
}

// ---------- PATH LIST CSV ----------

static const char* kPathHeader = "gain_re,gain_im,delay_s,azimuth_rad,elevation_rad,is_los";

void export_paths(const std::string& file, const PathList& paths) {
    std::ofstream os(file);
    if (!os)
        throw std::runtime_error("export_paths: cannot open " + file);
    os << kPathHeader << "\n";
    char buf[256];
    for (const auto& p : paths) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d", p.gain.real(),
                      p.gain.imag(), p.delay, p.azimuth, p.elevation, p.is_los ? 1 : 0);
        os << buf << "\n";
    }
}

PathList import_paths(const std::string& file) {
    std::ifstream is(file);
    if (!is)
        throw std::runtime_error("import_paths: cannot open " + file);

    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("import_paths: empty file " + file);
    // Tolerate trailing CR from foreign line endings.
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != kPathHeader)
        throw std::runtime_error("import_paths: bad header in " + file);

    PathList paths;
    std::size_t row = 1;
    bool seen_los = false;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (fields.size() != 6)
            throw std::runtime_error("import_paths: row " + std::to_string(row) +
                                     ": expected 6 fields");
        PathParam p;
        try {
            std::size_t pos = 0;
            p.gain = {std::stod(fields[0]), std::stod(fields[1])};
            p.delay = std::stod(fields[2]);
            p.azimuth = std::stod(fields[3]);
            p.elevation = std::stod(fields[4]);
            const long los = std::stol(fields[5], &pos);
            if (pos != fields[5].size() || (los != 0 && los != 1))
                throw std::invalid_argument("is_los must be 0 or 1");
            p.is_los = (los == 1);
            p.validate();
        } catch (const std::exception& e) {
            throw std::runtime_error("import_paths: row " + std::to_string(row) + ": " +
                                     e.what());
        }
        if (p.is_los) {
            if (seen_los)
                throw std::runtime_error("import_paths: row " + std::to_string(row) +
                                         ": more than one direct path");
            seen_los = true;
        }
        paths.push_back(p);
    }
    return paths;
}

} // namespace sidelink
