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

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "sidelink/scene.hpp"

using namespace sidelink;
using Catch::Approx;

namespace {

constexpr double kLambda = speed_of_light / 5.9e9;

Scene los_only_scene(const arma::vec3& rsu_position, double yaw = 0.0) {
    Scene s;
    s.rsu.position = rsu_position;
    s.rsu.rotation = {0.0, 0.0, yaw};
    s.has_ground = false;
    return s;
}

const PathParam* find_los(const PathList& paths) {
    for (const PathParam& p : paths)
        if (p.is_los)
            return &p;
    return nullptr;
}

} // namespace

TEST_CASE("free space direct path has the closed-form gain and delay") {
    const Scene s = los_only_scene({0.0, 0.0, 10.0});
    const arma::vec3 cru{0.0, -30.0, 1.5};
    const PathList paths = generate_paths(s, cru, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(paths.size() == 1);
    const PathParam& p = paths[0];
    CHECK(p.is_los);

    const double dist = arma::norm(cru - s.rsu.position);
    CHECK(p.delay == Approx(dist / speed_of_light).epsilon(1e-14));
    CHECK(std::abs(p.gain) == Approx(kLambda / (4.0 * pi * dist)).epsilon(1e-12));
    CHECK(std::arg(p.gain) ==
          Approx(wrap_angle(-2.0 * pi * dist / kLambda)).margin(1e-9));

    // Arrival direction in the RSU body frame (identity orientation here).
    const arma::vec3 expected = arma::normalise(cru - s.rsu.position);
    CHECK(arma::norm(p.direction() - expected) < 1e-12);
}

TEST_CASE("ground bounce matches the image construction") {
    Scene s = los_only_scene({0.0, 0.0, 10.0});
    s.has_ground = true;
    s.ground_loss = 0.4;
    const arma::vec3 cru{0.0, -30.0, 1.5};
    const PathList paths = generate_paths(s, cru, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].is_los); // direct first, delays ascending
    CHECK(paths[0].delay < paths[1].delay);

    // Mirror the CRU across z = 0; the bounce length is the image distance.
    const arma::vec3 image{0.0, -30.0, -1.5};
    const double len = arma::norm(image - s.rsu.position);
    const PathParam& b = paths[1];
    CHECK(b.delay == Approx(len / speed_of_light).epsilon(1e-14));
    CHECK(std::abs(b.gain) == Approx(0.4 * kLambda / (4.0 * pi * len)).epsilon(1e-12));
    CHECK_FALSE(b.is_los);

    // The bounce arrives from below: direction of the image point.
    const arma::vec3 expected = arma::normalise(image - s.rsu.position);
    CHECK(arma::norm(b.direction() - expected) < 1e-12);
}

TEST_CASE("wall reflection matches the image construction") {
    Scene s = los_only_scene({0.0, 0.0, 5.0});
    // Wall in the x = 20 plane spanning y in [-40, 40], z in [0, 20].
    Reflector wall;
    wall.corner = {20.0, -40.0, 0.0};
    wall.horizontal = {0.0, 80.0};
    wall.height = 20.0;
    wall.loss = 0.7;
    s.reflectors.push_back(wall);

    const arma::vec3 cru{5.0, -20.0, 1.5};
    const PathList paths = generate_paths(s, cru, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(paths.size() == 2);

    const arma::vec3 image{2.0 * 20.0 - cru(0), cru(1), cru(2)};
    const double len = arma::norm(image - s.rsu.position);
    const PathParam& r = paths[1];
    CHECK(r.delay == Approx(len / speed_of_light).epsilon(1e-14));
    CHECK(std::abs(r.gain) == Approx(0.7 * kLambda / (4.0 * pi * len)).epsilon(1e-12));
    const arma::vec3 expected = arma::normalise(image - s.rsu.position);
    CHECK(arma::norm(r.direction() - expected) < 1e-12);
}

TEST_CASE("specular point outside the finite wall yields no reflection") {
    Scene s = los_only_scene({0.0, 0.0, 5.0});
    Reflector wall;
    wall.corner = {20.0, 100.0, 0.0}; // displaced; mirror point falls outside
    wall.horizontal = {0.0, 40.0};
    wall.height = 20.0;
    wall.loss = 0.7;
    s.reflectors.push_back(wall);

    const PathList paths = generate_paths(s, {5.0, -20.0, 1.5}, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].is_los);
}

TEST_CASE("an obstructing wall removes the direct path") {
    Scene s = los_only_scene({0.0, 0.0, 5.0});
    Reflector wall;
    wall.corner = {-10.0, -15.0, 0.0};
    wall.horizontal = {20.0, 0.0}; // spans x in [-10, 10] at y = -15
    wall.height = 30.0;
    wall.loss = 0.5;
    s.reflectors.push_back(wall);

    // CRU straight behind the wall: the direct ray crosses it.
    const PathList paths = generate_paths(s, {0.0, -30.0, 1.5}, ReceiverEnd::AtRsu, kLambda);
    CHECK(find_los(paths) == nullptr);
}

TEST_CASE("receiver end selects the frame of the arrival angles") {
    Scene s = los_only_scene({0.0, 0.0, 10.0}, pi / 2.0);
    const arma::vec3 cru{0.0, -30.0, 1.5};

    const PathList at_rsu = generate_paths(s, cru, ReceiverEnd::AtRsu, kLambda);
    const PathList at_cru = generate_paths(s, cru, ReceiverEnd::AtCru, kLambda);
    REQUIRE(at_rsu.size() == 1);
    REQUIRE(at_cru.size() == 1);
    CHECK(at_rsu[0].delay == Approx(at_cru[0].delay).epsilon(1e-15));

    // RSU frame includes its yaw; the CRU frame is axis aligned.
    const arma::vec3 rsu_expected =
        s.rsu.global_to_body() * arma::normalise(cru - s.rsu.position);
    CHECK(arma::norm(at_rsu[0].direction() - rsu_expected) < 1e-12);
    const arma::vec3 cru_expected = arma::normalise(s.rsu.position - cru);
    CHECK(arma::norm(at_cru[0].direction() - cru_expected) < 1e-12);
}

TEST_CASE("add_box appends four walls that enclose the footprint") {
    Scene s = los_only_scene({0.0, 0.0, 10.0});
    add_box(s, 45.0, -45.0, 50.0, 50.0, 30.0, 0.6);
    REQUIRE(s.reflectors.size() == 4);
    CHECK_NOTHROW(s.validate());
    for (const Reflector& r : s.reflectors) {
        CHECK(r.height == Approx(30.0));
        CHECK(r.loss == Approx(0.6));
        CHECK(arma::norm(r.edge_u()) == Approx(50.0));
    }
    // A CRU on the road beside the box: direct path plus the bounce off the
    // wall in the x = 20 plane (specular point at y ~ -23, inside the wall).
    const PathList paths = generate_paths(s, {1.6, -45.0, 1.5}, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(paths.size() == 2);
    CHECK(find_los(paths) != nullptr);
    const arma::vec3 image{2.0 * 20.0 - 1.6, -45.0, 1.5};
    CHECK(paths[1].delay ==
          Approx(arma::norm(image - s.rsu.position) / speed_of_light).epsilon(1e-14));
}

TEST_CASE("generate_paths rejects a receiver on top of the anchor") {
    const Scene s = los_only_scene({0.0, 0.0, 10.0});
    CHECK_THROWS_AS(generate_paths(s, {0.0, 0.0, 10.0}, ReceiverEnd::AtRsu, kLambda),
                    std::invalid_argument);
}

TEST_CASE("trajectory sampling walks the route at constant speed") {
    Trajectory t;
    t.waypoints = {{1.6, -70.0, 1.5}, {1.6, 70.0, 1.5}};
    t.speed = 14.0;
    t.sample_interval = 1.0;
    CHECK_NOTHROW(t.validate());

    const std::vector<arma::vec3> p = t.sample_positions();
    REQUIRE(p.size() == 11); // 140 m at 14 m/s, sampled once per second
    CHECK(arma::norm(p.front() - arma::vec3{1.6, -70.0, 1.5}) < 1e-12);
    CHECK(arma::norm(p.back() - arma::vec3{1.6, 70.0, 1.5}) < 1e-12);
    for (std::size_t i = 1; i < p.size(); ++i)
        CHECK(arma::norm(p[i] - p[i - 1]) == Approx(14.0).epsilon(1e-12));
}

TEST_CASE("trajectory sampling keeps constant speed across corners") {
    Trajectory t;
    t.waypoints = {{0.0, 0.0, 1.0}, {3.0, 0.0, 1.0}, {3.0, 4.0, 1.0}};
    t.speed = 2.0;
    t.sample_interval = 1.0;
    const std::vector<arma::vec3> p = t.sample_positions();
    REQUIRE(p.size() == 4); // 7 m route at 2 m/s minus the leftover tail
    // Third sample is 1 m past the corner.
    CHECK(arma::norm(p[2] - arma::vec3{3.0, 1.0, 1.0}) < 1e-12);
}

TEST_CASE("path CSV round-trips every field") {
    Scene s = los_only_scene({0.0, 0.0, 10.0});
    s.has_ground = true;
    s.ground_loss = 0.4;
    add_box(s, 45.0, 45.0, 50.0, 50.0, 30.0, 0.6);
    const PathList original = generate_paths(s, {45.0, -25.0, 1.5}, ReceiverEnd::AtRsu, kLambda);
    REQUIRE(original.size() >= 2);

    const std::string file = "paths_roundtrip_test.csv";
    export_paths(file, original);
    const PathList loaded = import_paths(file);
    std::remove(file.c_str());

    REQUIRE(loaded.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        CHECK(loaded[i].gain.real() == Approx(original[i].gain.real()).epsilon(1e-14));
        CHECK(loaded[i].gain.imag() == Approx(original[i].gain.imag()).epsilon(1e-14));
        CHECK(loaded[i].delay == Approx(original[i].delay).epsilon(1e-14));
        CHECK(loaded[i].azimuth == Approx(original[i].azimuth).margin(1e-14));
        CHECK(loaded[i].elevation == Approx(original[i].elevation).margin(1e-14));
        CHECK(loaded[i].is_los == original[i].is_los);
    }
}

TEST_CASE("path CSV import names the offending row") {
    const std::string file = "paths_malformed_test.csv";
    {
        std::ofstream out(file);
        out << "gain_re,gain_im,delay_s,azimuth_rad,elevation_rad,is_los\n";
        out << "1e-4,0,1e-7,0.1,0.2,1\n";
        out << "not_a_number,0,1e-7,0.1,0.2,0\n";
    }
    CHECK_THROWS_WITH(import_paths(file), Catch::Matchers::ContainsSubstring("3"));
    std::remove(file.c_str());
}

TEST_CASE("path CSV import rejects duplicate direct paths") {
    const std::string file = "paths_two_los_test.csv";
    {
        std::ofstream out(file);
        out << "gain_re,gain_im,delay_s,azimuth_rad,elevation_rad,is_los\n";
        out << "1e-4,0,1e-7,0.1,0.2,1\n";
        out << "1e-4,0,2e-7,0.1,0.2,1\n";
    }
    CHECK_THROWS_AS(import_paths(file), std::runtime_error);
    std::remove(file.c_str());
}
