#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "trirec/geometry.hpp"

using namespace trirec;
using namespace trirec::geom;

TEST_CASE("look_at camera validates and points at the target") {
    Camera cam = look_at_camera(Vec3(0, 0, 2), Vec3(0, 0, 0), 0.6, 64, 64);
    CHECK_NOTHROW(validate_camera(cam, 8));
    // Forward axis (third rotation column) points from eye to target.
    Vec3 fwd(cam.cam_to_world.rot(0, 2), cam.cam_to_world.rot(1, 2), cam.cam_to_world.rot(2, 2));
    CHECK(fwd.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fwd.y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fwd.z == doctest::Approx(-1.0));
}

TEST_CASE("validate_camera rejects bad inputs") {
    Camera cam = look_at_camera(Vec3(0, 0, 2), Vec3(0, 0, 0), 0.6, 64, 64);
    Camera bad_rot = cam;
    bad_rot.cam_to_world.rot(0, 0) += 0.01;
    CHECK_THROWS(validate_camera(bad_rot));
    Camera bad_planes = cam;
    bad_planes.near_plane = 5.0;
    bad_planes.far_plane = 1.0;
    CHECK_THROWS(validate_camera(bad_planes));
    Camera bad_patch = cam;
    bad_patch.height = 60;  // not divisible by 8
    CHECK_THROWS(validate_camera(bad_patch, 8));
}

TEST_CASE("center pixel ray points along the optical axis") {
    // Odd resolution so a pixel center coincides with the principal point.
    Camera cam = look_at_camera(Vec3(0, 0, 2), Vec3(0, 0, 0), 0.6, 65, 65);
    Vec3 o, d;
    pixel_ray(cam, 32, 32, o, d);
    CHECK(norm(o - Vec3(0, 0, 2)) == doctest::Approx(0.0));
    CHECK(norm(d - Vec3(0, 0, -1)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pixel rays hit the image plane at the expected offsets") {
    Camera cam = look_at_camera(Vec3(0, 0, 2), Vec3(0, 0, 0), 0.6, 64, 64);
    double f = 0.5 * 64 / std::tan(0.3);
    Vec3 o, d;
    pixel_ray(cam, 0, 0, o, d);
    // Camera-space direction before normalization is ((0.5-32)/f, (0.5-32)/f, 1).
    // For this pose the camera axes in world space are right=+x, down=-y,
    // forward=-z, so the world direction's y and z components flip sign.
    Vec3 expect = normalized(Vec3((0.5 - 32) / f, -(0.5 - 32) / f, -1.0));
    CHECK(norm(d - expect) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("plucker moments are orthogonal to directions and shift-invariant") {
    Camera cam = look_at_camera(Vec3(1.2, -0.4, 1.7), Vec3(0, 0, 0), 0.6, 16, 16);
    RayGrid grid = plucker_rays(cam);
    REQUIRE(grid.directions.size() == 256);
    for (size_t i = 0; i < grid.directions.size(); ++i) {
        const Vec3& d = grid.directions[i];
        const Vec3& m = grid.moments[i];
        CHECK(norm(d) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::fabs(dot(d, m)) < 1e-12);
        // m is invariant to sliding the origin along the ray.
        Vec3 o = cam.cam_to_world.trans + d * 3.7;
        Vec3 m2 = cross(o, d);
        CHECK(norm(m - m2) < 1e-12);
    }
}

TEST_CASE("relative_pose maps the conditional camera to the identity") {
    std::vector<Camera> cams;
    cams.push_back(look_at_camera(Vec3(0, 0.5, 2), Vec3(0, 0, 0), 0.6, 16, 16));
    cams.push_back(look_at_camera(Vec3(1.5, -0.2, 1.0), Vec3(0, 0, 0), 0.6, 16, 16));
    cams.push_back(look_at_camera(Vec3(-1.1, 0.8, -1.2), Vec3(0, 0, 0), 0.6, 16, 16));
    std::vector<Camera> rel = relative_pose(cams, 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(rel[1].cam_to_world.rot(i, j) ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    CHECK(norm(rel[1].cam_to_world.trans) < 1e-12);

    // Relative transforms between cameras are preserved.
    Mat4 before = cams[1].cam_to_world.inverse() * cams[2].cam_to_world;
    Mat4 after = rel[1].cam_to_world.inverse() * rel[2].cam_to_world;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(before.rot(i, j) == doctest::Approx(after.rot(i, j)).epsilon(1e-10));
    CHECK(norm(before.trans - after.trans) < 1e-10);

    CHECK_THROWS_AS((void)relative_pose(cams, 3), std::out_of_range);
}

TEST_CASE("sample_box_occluder respects its spec and seed") {
    OccluderSpec spec;
    spec.len_min = 0.2;
    spec.len_max = 0.9;
    Rng rng(42);
    for (int k = 0; k < 200; ++k) {
        BoxOccluder box = sample_box_occluder(rng, spec);
        for (int i = 0; i < 3; ++i) {
            CHECK(2.0 * box.half_extents[i] >= 0.2);
            CHECK(2.0 * box.half_extents[i] <= 0.9);
            CHECK(box.center[i] >= spec.bounds_lo[i]);
            CHECK(box.center[i] <= spec.bounds_hi[i]);
        }
    }
    Rng a(7), b(7);
    BoxOccluder ba = sample_box_occluder(a, spec);
    BoxOccluder bb = sample_box_occluder(b, spec);
    CHECK(norm(ba.center - bb.center) == 0.0);
    CHECK(norm(ba.half_extents - bb.half_extents) == 0.0);

    OccluderSpec bad = spec;
    bad.len_min = 1.0;  // > len_max
    CHECK_THROWS_AS((void)sample_box_occluder(rng, bad), std::invalid_argument);
}

TEST_CASE("ray_box_depth axis-aligned examples") {
    BoxOccluder box;
    box.center = Vec3(0, 0, 0);
    box.half_extents = Vec3(0.5, 0.5, 0.5);
    auto hit = ray_box_depth(Vec3(0, 0, 2), Vec3(0, 0, -1), box);
    REQUIRE(hit.has_value());
    CHECK(*hit == doctest::Approx(1.5));
    // Miss past the corner.
    CHECK(!ray_box_depth(Vec3(0, 2, 2), Vec3(0, 0, -1), box).has_value());
    // Origin inside: exit distance.
    auto exit = ray_box_depth(Vec3(0, 0, 0), Vec3(1, 0, 0), box);
    REQUIRE(exit.has_value());
    CHECK(*exit == doctest::Approx(0.5));
}

TEST_CASE("ray_box_depth matches a brute-force sampled oracle") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    OccluderSpec spec;
    int hits = 0;
    for (int k = 0; k < 300; ++k) {
        BoxOccluder box = sample_box_occluder(rng, spec);
        Vec3 o(u(rng) * 3, u(rng) * 3, 2.5);
        Vec3 d;
        if (k % 2 == 0) {
            // Aim at a point near the box so the hit branch is exercised.
            Vec3 target = box.center + Vec3(u(rng), u(rng), u(rng)) * 0.3;
            d = normalized(target - o);
        } else {
            d = normalized(Vec3(u(rng), u(rng), -1.0));
        }
        auto t = ray_box_depth(o, d, box);
        // Brute force: walk the ray and find the first point inside the box.
        double t_first = -1.0;
        for (double s = 0.0; s < 8.0; s += 1e-4) {
            Vec3 p = o + d * s;
            Vec3 local = box.rotation.transposed() * (p - box.center);
            if (std::fabs(local.x) <= box.half_extents.x &&
                std::fabs(local.y) <= box.half_extents.y &&
                std::fabs(local.z) <= box.half_extents.z) {
                t_first = s;
                break;
            }
        }
        if (t.has_value()) {
            ++hits;
            REQUIRE(t_first >= 0.0);
            CHECK(std::fabs(*t - t_first) < 2e-4);
        } else {
            CHECK(t_first < 0.0);
        }
    }
    CHECK(hits > 20);  // the sample actually exercised the hit branch
}

TEST_CASE("ray_cube_near_far brackets the unit cube traversal") {
    double t0 = 0, t1 = 0;
    CHECK(ray_cube_near_far(Vec3(0, 0, 3), Vec3(0, 0, -1), t0, t1));
    CHECK(t0 == doctest::Approx(2.0));
    CHECK(t1 == doctest::Approx(4.0));
    CHECK(!ray_cube_near_far(Vec3(0, 3, 3), Vec3(0, 0, -1), t0, t1));
    // Origin inside: near clamps to zero.
    CHECK(ray_cube_near_far(Vec3(0, 0, 0), Vec3(0, 0, 1), t0, t1));
    CHECK(t0 == doctest::Approx(0.0));
    CHECK(t1 == doctest::Approx(1.0));
}

TEST_CASE("camera serialization round-trips exactly") {
    std::vector<Camera> cams;
    cams.push_back(look_at_camera(Vec3(0.123456789012345, 0.7, 2.1), Vec3(0, 0, 0), 0.6, 64, 48));
    cams.push_back(look_at_camera(Vec3(-1.9, 0.33, 0.4), Vec3(0.01, -0.02, 0.03), 0.8, 32, 32));
    std::string path = (std::filesystem::temp_directory_path() / "trirec_cams_test.txt").string();
    save_cameras(path, cams);
    std::vector<Camera> back = load_cameras(path);
    REQUIRE(back.size() == cams.size());
    for (size_t k = 0; k < cams.size(); ++k) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(back[k].cam_to_world.rot(i, j) == cams[k].cam_to_world.rot(i, j));
        CHECK(norm(back[k].cam_to_world.trans - cams[k].cam_to_world.trans) == 0.0);
        CHECK(back[k].fov_y == cams[k].fov_y);
        CHECK(back[k].height == cams[k].height);
        CHECK(back[k].width == cams[k].width);
    }
    std::filesystem::remove(path);
}
