#pragma once

#include <limits>
#include <string>
#include <vector>

#include "trirec/geometry.hpp"
#include "trirec/vecmath.hpp"

namespace trirec::scene {

using geom::Camera;
using geom::Rng;

enum class PrimitiveKind { Sphere, Box, Torus, Capsule };

const char* kind_name(PrimitiveKind k);
PrimitiveKind kind_from_name(const std::string& name);

struct PrimitiveSDF {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    // sphere: params[0]=radius
    // box:    params[0..2]=half extents
    // torus:  params[0]=major radius, params[1]=minor radius
    // capsule:params[0]=half segment length (along local y), params[1]=radius
    std::array<double, 3> params{0.3, 0.0, 0.0};
    Mat4 transform;  // local-to-world rigid
    Vec3 color{0.7, 0.7, 0.7};
};

// Exact signed distance of a single primitive.
double primitive_sdf(const PrimitiveSDF& prim, const Vec3& p);

// Loose bounding radius of a primitive about its own center.
double primitive_bound_radius(const PrimitiveSDF& prim);

struct SceneSDF {
    std::vector<PrimitiveSDF> primitives;
};

struct GTView {
    int height = 0;
    int width = 0;
    std::vector<Vec3> rgb;       // [0,1]
    std::vector<double> depth;   // +inf for misses
    std::vector<Vec3> normal;    // unit where hit, zero otherwise
    std::vector<uint8_t> sil;    // {0,1}
};

constexpr double kInfDepth = std::numeric_limits<double>::infinity();

// Union (min) over primitives.
double eval_sdf(const SceneSDF& scene, const Vec3& p);
// Index of the nearest primitive at p.
int nearest_primitive(const SceneSDF& scene, const Vec3& p);
// Central-difference SDF gradient, normalized.
Vec3 sdf_normal(const SceneSDF& scene, const Vec3& p, double step = 1e-4);

// Sphere trace a single ray; returns hit depth or +inf.
double trace_ray(const SceneSDF& scene, const Vec3& origin, const Vec3& dir,
                 double t_max = 6.0, double eps = 1e-5, int max_steps = 256);

// Full sphere-traced render: rgb (headlight Lambertian on white background),
// depth, world-space normals, silhouette.
GTView render_ground_truth(const SceneSDF& scene, const Camera& cam);

// Shade a single hit (headlight Lambertian). Exposed for crop rendering.
Vec3 shade_hit(const SceneSDF& scene, const Vec3& p, const Vec3& view_dir);

// 2x2 supersampled RGB for one pixel (misses average in the white
// background). Shared by full-view and crop ground-truth rendering.
Vec3 shade_pixel_aa(const SceneSDF& scene, const Camera& cam, int row, int col);

struct SceneSpec {
    int n_min = 2;
    int n_max = 4;
    std::vector<PrimitiveKind> kinds{PrimitiveKind::Sphere, PrimitiveKind::Box,
                                     PrimitiveKind::Torus, PrimitiveKind::Capsule};
    double size_min = 0.15;
    double size_max = 0.45;
};

// Random composite scene, rescaled to fit the radius-0.9 sphere.
SceneSDF generate_random_scene(Rng& rng, const SceneSpec& spec);

// Two-part family for edit experiments: a body primitive plus a distinct
// attachment primitive sitting on top. attachment_index is always 1.
SceneSDF generate_editable_scene(Rng& rng);
// World-space box around the attachment region of the editable family.
geom::BoxOccluder editable_attachment_box();

// Cameras uniformly distributed on a radius-2.2 sphere looking at the origin,
// elevation clamped to [-60, 60] degrees.
Camera sample_camera(Rng& rng, int height, int width, double fov_y = 0.6);
// Deterministic ring of n cameras (fixed elevation), used for datasets.
std::vector<Camera> camera_ring(int n, int height, int width, double elevation_deg = 20.0,
                                double fov_y = 0.6, double phase = 0.0);

// scene.txt serialization (one primitive per line).
void save_scene(const std::string& path, const SceneSDF& scene);
SceneSDF load_scene(const std::string& path);

}  // namespace trirec::scene
