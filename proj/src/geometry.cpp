#include "trirec/geometry.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace trirec::geom {

void validate_camera(const Camera& cam, int patch_size) {
    const Mat3& r = cam.cam_to_world.rot;
    Mat3 rtr = r.transposed() * r;
    double err = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) err = std::max(err, std::fabs(rtr(i, j) - (i == j ? 1.0 : 0.0)));
    if (err >= 1e-6) throw std::runtime_error("camera rotation not orthonormal");
    if (!(cam.near_plane < cam.far_plane)) throw std::runtime_error("camera near >= far");
    if (cam.height <= 0 || cam.width <= 0) throw std::runtime_error("camera resolution invalid");
    if (patch_size > 1 && (cam.height % patch_size != 0 || cam.width % patch_size != 0))
        throw std::runtime_error("camera resolution not divisible by patch size");
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, double fov_y, int height, int width) {
    Vec3 fwd = normalized(target - eye);  // camera +z
    Vec3 world_up{0, 1, 0};
    Vec3 right = cross(fwd, world_up);
    if (norm(right) < 1e-8) right = cross(fwd, Vec3{1, 0, 0});
    right = normalized(right);
    Vec3 down = cross(fwd, right);  // camera +y points down in image
    Camera cam;
    // Columns of the rotation are the camera axes in world space.
    cam.cam_to_world.rot(0, 0) = right.x; cam.cam_to_world.rot(1, 0) = right.y; cam.cam_to_world.rot(2, 0) = right.z;
    cam.cam_to_world.rot(0, 1) = down.x;  cam.cam_to_world.rot(1, 1) = down.y;  cam.cam_to_world.rot(2, 1) = down.z;
    cam.cam_to_world.rot(0, 2) = fwd.x;   cam.cam_to_world.rot(1, 2) = fwd.y;   cam.cam_to_world.rot(2, 2) = fwd.z;
    cam.cam_to_world.trans = eye;
    cam.fov_y = fov_y;
    cam.height = height;
    cam.width = width;
    return cam;
}

void pixel_ray(const Camera& cam, int row, int col, Vec3& origin, Vec3& dir) {
    pixel_ray_at(cam, row + 0.5, col + 0.5, origin, dir);
}

void pixel_ray_at(const Camera& cam, double row_c, double col_c, Vec3& origin, Vec3& dir) {
    double f = 0.5 * cam.height / std::tan(0.5 * cam.fov_y);
    double cx = 0.5 * cam.width, cy = 0.5 * cam.height;
    Vec3 d_cam{(col_c - cx) / f, (row_c - cy) / f, 1.0};
    origin = cam.cam_to_world.trans;
    dir = normalized(cam.cam_to_world.apply_dir(d_cam));
}

std::vector<Camera> relative_pose(const std::vector<Camera>& cameras, int cond_index) {
    if (cond_index < 0 || cond_index >= static_cast<int>(cameras.size()))
        throw std::out_of_range("relative_pose: cond_index out of range");
    Mat4 world_to_cond = cameras[cond_index].cam_to_world.inverse();
    std::vector<Camera> out = cameras;
    for (auto& cam : out) cam.cam_to_world = world_to_cond * cam.cam_to_world;
    return out;
}

RayGrid plucker_rays(const Camera& cam) {
    validate_camera(cam);
    RayGrid grid;
    grid.height = cam.height;
    grid.width = cam.width;
    grid.directions.resize(static_cast<size_t>(cam.height) * cam.width);
    grid.moments.resize(grid.directions.size());
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            Vec3 o, d;
            pixel_ray(cam, r, c, o, d);
            size_t idx = static_cast<size_t>(r) * cam.width + c;
            grid.directions[idx] = d;
            grid.moments[idx] = cross(o, d);
        }
    }
    return grid;
}

BoxOccluder sample_box_occluder(Rng& rng, const OccluderSpec& spec) {
    if (spec.len_min <= 0 || spec.len_min > spec.len_max)
        throw std::invalid_argument("sample_box_occluder: invalid side length range");
    for (int i = 0; i < 3; ++i)
        if (spec.bounds_lo[i] > spec.bounds_hi[i])
            throw std::invalid_argument("sample_box_occluder: empty bounds");
    std::uniform_real_distribution<double> ulen(spec.len_min, spec.len_max);
    BoxOccluder box;
    for (int i = 0; i < 3; ++i) box.half_extents[i] = 0.5 * ulen(rng);
    for (int i = 0; i < 3; ++i) {
        std::uniform_real_distribution<double> uc(spec.bounds_lo[i], spec.bounds_hi[i]);
        box.center[i] = uc(rng);
    }
    if (spec.random_rotation) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        Vec3 axis{2 * u01(rng) - 1, 2 * u01(rng) - 1, 2 * u01(rng) - 1};
        if (norm(axis) < 1e-6) axis = {0, 1, 0};
        box.rotation = rotation_about_axis(axis, u01(rng) * 2.0 * M_PI);
    }
    return box;
}

std::optional<double> ray_box_depth(const Vec3& origin, const Vec3& dir, const BoxOccluder& box) {
    // Slab test in the box's local frame.
    Mat3 rt = box.rotation.transposed();
    Vec3 o = rt * (origin - box.center);
    Vec3 d = rt * dir;
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(d[i]) < 1e-12) {
            if (std::fabs(o[i]) > box.half_extents[i]) return std::nullopt;
            continue;
        }
        double ta = (-box.half_extents[i] - o[i]) / d[i];
        double tb = (box.half_extents[i] - o[i]) / d[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::nullopt;
    }
    // Origin inside the box hits the surface at t1; otherwise at t0.
    Vec3 local = cwise_abs(o);
    bool inside = local.x <= box.half_extents.x && local.y <= box.half_extents.y &&
                  local.z <= box.half_extents.z;
    return inside ? t1 : t0;
}

bool ray_cube_near_far(const Vec3& origin, const Vec3& dir, double& t_near, double& t_far) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(dir[i]) < 1e-12) {
            if (std::fabs(origin[i]) > 1.0) return false;
            continue;
        }
        double ta = (-1.0 - origin[i]) / dir[i];
        double tb = (1.0 - origin[i]) / dir[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 >= t1) return false;
    t_near = t0;
    t_far = t1;
    return true;
}

void save_cameras(const std::string& path, const std::vector<Camera>& cams) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << cams.size() << "\n";
    for (const auto& cam : cams) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f << cam.cam_to_world.rot(r, c) << " ";
        f << cam.cam_to_world.trans.x << " " << cam.cam_to_world.trans.y << " "
          << cam.cam_to_world.trans.z << "\n";
        f << cam.fov_y << " " << cam.height << " " << cam.width << " " << cam.near_plane << " "
          << cam.far_plane << "\n";
    }
}

std::vector<Camera> load_cameras(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    size_t n = 0;
    f >> n;
    std::vector<Camera> cams(n);
    for (auto& cam : cams) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f >> cam.cam_to_world.rot(r, c);
        f >> cam.cam_to_world.trans.x >> cam.cam_to_world.trans.y >> cam.cam_to_world.trans.z;
        f >> cam.fov_y >> cam.height >> cam.width >> cam.near_plane >> cam.far_plane;
    }
    if (!f) throw std::runtime_error("malformed camera file " + path);
    return cams;
}

}  // namespace trirec::geom
