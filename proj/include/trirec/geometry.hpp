#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trirec/vecmath.hpp"

namespace trirec::geom {

using Rng = std::mt19937_64;

// Posed pinhole camera. Convention: camera space has x right, y down,
// z forward; cam_to_world maps camera space to world space.
struct Camera {
    Mat4 cam_to_world;
    double fov_y = 0.6;  // radians
    int height = 64;
    int width = 64;
    double near_plane = 0.1;
    double far_plane = 10.0;
};

// Throws if the rotation block is not orthonormal or near/far are inconsistent.
void validate_camera(const Camera& cam, int patch_size = 1);

// Camera positioned at `eye` looking at `target`, world up (0,1,0).
Camera look_at_camera(const Vec3& eye, const Vec3& target, double fov_y, int height, int width);

// Per-pixel 6-channel Plücker ray field: unit world directions and moments m = o x d.
struct RayGrid {
    int height = 0;
    int width = 0;
    std::vector<Vec3> directions;  // row-major H*W
    std::vector<Vec3> moments;
};

// Random axis-aligned-by-default rectangular occluder.
struct BoxOccluder {
    Vec3 center;
    Vec3 half_extents{0.1, 0.1, 0.1};
    Mat3 rotation;
};

struct OccluderSpec {
    double len_min = 0.2;
    double len_max = 0.9;
    Vec3 bounds_lo{-0.9, -0.9, -0.9};
    Vec3 bounds_hi{0.9, 0.9, 0.9};
    bool random_rotation = false;
};

// World-space ray through the center of pixel (row, col).
void pixel_ray(const Camera& cam, int row, int col, Vec3& origin, Vec3& dir);

// Ray through a continuous image point (row_c, col_c) in pixel units, where
// (r + 0.5, c + 0.5) is the center of pixel (r, c). Used for subpixel
// supersampling.
void pixel_ray_at(const Camera& cam, double row_c, double col_c, Vec3& origin, Vec3& dir);

// Re-expresses all poses relative to the conditional camera; the conditional
// camera's returned pose is the identity.
std::vector<Camera> relative_pose(const std::vector<Camera>& cameras, int cond_index);

RayGrid plucker_rays(const Camera& cam);

BoxOccluder sample_box_occluder(Rng& rng, const OccluderSpec& spec);

// Smallest nonnegative hit parameter along the ray, or nullopt on miss.
std::optional<double> ray_box_depth(const Vec3& origin, const Vec3& dir, const BoxOccluder& box);

// Entry/exit of the ray with the axis-aligned cube [-1,1]^3 (clamped to t >= 0).
bool ray_cube_near_far(const Vec3& origin, const Vec3& dir, double& t_near, double& t_far);

// Plain-text camera set serialization: one block per camera with 12 transform
// floats (rotation rows then translation), fov, resolution, near, far.
void save_cameras(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::string& path);

}  // namespace trirec::geom
