#include "trirec/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trirec::scene {

const char* kind_name(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::Box: return "box";
        case PrimitiveKind::Torus: return "torus";
        case PrimitiveKind::Capsule: return "capsule";
    }
    return "sphere";
}

PrimitiveKind kind_from_name(const std::string& name) {
    if (name == "sphere") return PrimitiveKind::Sphere;
    if (name == "box") return PrimitiveKind::Box;
    if (name == "torus") return PrimitiveKind::Torus;
    if (name == "capsule") return PrimitiveKind::Capsule;
    throw std::invalid_argument("unknown primitive kind: " + name);
}

static double sdf_local(const PrimitiveSDF& prim, const Vec3& p) {
    switch (prim.kind) {
        case PrimitiveKind::Sphere:
            return norm(p) - prim.params[0];
        case PrimitiveKind::Box: {
            Vec3 b{prim.params[0], prim.params[1], prim.params[2]};
            Vec3 q = cwise_abs(p) - b;
            Vec3 qp = cwise_max(q, Vec3{0, 0, 0});
            return norm(qp) + std::min(max_comp(q), 0.0);
        }
        case PrimitiveKind::Torus: {
            double qx = std::sqrt(p.x * p.x + p.z * p.z) - prim.params[0];
            return std::sqrt(qx * qx + p.y * p.y) - prim.params[1];
        }
        case PrimitiveKind::Capsule: {
            double h = prim.params[0];
            double cy = std::clamp(p.y, -h, h);
            Vec3 q{p.x, p.y - cy, p.z};
            return norm(q) - prim.params[1];
        }
    }
    return 1e9;
}

double primitive_sdf(const PrimitiveSDF& prim, const Vec3& p) {
    Mat3 rt = prim.transform.rot.transposed();
    Vec3 local = rt * (p - prim.transform.trans);
    return sdf_local(prim, local);
}

double primitive_bound_radius(const PrimitiveSDF& prim) {
    switch (prim.kind) {
        case PrimitiveKind::Sphere: return prim.params[0];
        case PrimitiveKind::Box:
            return norm(Vec3{prim.params[0], prim.params[1], prim.params[2]});
        case PrimitiveKind::Torus: return prim.params[0] + prim.params[1];
        case PrimitiveKind::Capsule: return prim.params[0] + prim.params[1];
    }
    return 0.0;
}

double eval_sdf(const SceneSDF& scene, const Vec3& p) {
    double d = 1e9;
    for (const auto& prim : scene.primitives) d = std::min(d, primitive_sdf(prim, p));
    return d;
}

int nearest_primitive(const SceneSDF& scene, const Vec3& p) {
    int best = 0;
    double bd = 1e9;
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        double d = primitive_sdf(scene.primitives[i], p);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

Vec3 sdf_normal(const SceneSDF& scene, const Vec3& p, double step) {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 a = p, b = p;
        a[i] += step;
        b[i] -= step;
        g[i] = (eval_sdf(scene, a) - eval_sdf(scene, b)) / (2 * step);
    }
    double n = norm(g);
    return n > 1e-12 ? g / n : Vec3{0, 0, 0};
}

double trace_ray(const SceneSDF& scene, const Vec3& origin, const Vec3& dir, double t_max,
                 double eps, int max_steps) {
    double t = 0.0;
    for (int i = 0; i < max_steps; ++i) {
        Vec3 p = origin + t * dir;
        double d = eval_sdf(scene, p);
        if (std::fabs(d) < eps) return t;
        t += d;
        if (t > t_max) break;
    }
    return kInfDepth;
}

Vec3 shade_hit(const SceneSDF& scene, const Vec3& p, const Vec3& view_dir) {
    Vec3 albedo = scene.primitives[nearest_primitive(scene, p)].color;
    Vec3 n = sdf_normal(scene, p);
    double lambert = std::max(0.0, dot(n, -view_dir));
    return albedo * (0.25 + 0.75 * lambert);
}

Vec3 shade_pixel_aa(const SceneSDF& scene, const Camera& cam, int row, int col) {
    // 2x2 subpixel supersampling for RGB: a hard-edged single-ray render is
    // unmatchable by any soft (volumetric) reconstruction, which would cap
    // image metrics at the aliasing error rather than reconstruction quality.
    Vec3 acc{0, 0, 0};
    for (double dr : {0.25, 0.75})
        for (double dc : {0.25, 0.75}) {
            Vec3 o, d;
            geom::pixel_ray_at(cam, row + dr, col + dc, o, d);
            double t = trace_ray(scene, o, d);
            acc = acc + (std::isfinite(t) ? shade_hit(scene, o + t * d, d) : Vec3{1, 1, 1});
        }
    return acc * 0.25;
}

GTView render_ground_truth(const SceneSDF& scene, const Camera& cam) {
    geom::validate_camera(cam);
    GTView view;
    view.height = cam.height;
    view.width = cam.width;
    size_t n = static_cast<size_t>(cam.height) * cam.width;
    view.rgb.assign(n, Vec3{1, 1, 1});  // white background
    view.depth.assign(n, kInfDepth);
    view.normal.assign(n, Vec3{0, 0, 0});
    view.sil.assign(n, 0);
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            Vec3 o, d;
            geom::pixel_ray(cam, r, c, o, d);
            double t = trace_ray(scene, o, d);
            size_t idx = static_cast<size_t>(r) * cam.width + c;
            view.rgb[idx] = shade_pixel_aa(scene, cam, r, c);
            if (!std::isfinite(t)) continue;
            Vec3 p = o + t * d;
            view.depth[idx] = t;
            view.normal[idx] = sdf_normal(scene, p);
            view.sil[idx] = 1;
        }
    }
    return view;
}

static void rescale_into_bound(SceneSDF& scene, double bound) {
    double radius = 0.0;
    for (const auto& prim : scene.primitives)
        radius = std::max(radius, norm(prim.transform.trans) + primitive_bound_radius(prim));
    if (radius <= bound || radius <= 0) return;
    double s = bound / radius;
    for (auto& prim : scene.primitives) {
        prim.transform.trans = prim.transform.trans * s;
        for (auto& v : prim.params) v *= s;
    }
}

SceneSDF generate_random_scene(Rng& rng, const SceneSpec& spec) {
    if (spec.kinds.empty()) throw std::invalid_argument("generate_random_scene: no kinds");
    if (spec.n_min < 1 || spec.n_min > spec.n_max)
        throw std::invalid_argument("generate_random_scene: bad primitive count range");
    std::uniform_int_distribution<int> un(spec.n_min, spec.n_max);
    std::uniform_int_distribution<size_t> uk(0, spec.kinds.size() - 1);
    std::uniform_real_distribution<double> usize(spec.size_min, spec.size_max);
    std::uniform_real_distribution<double> upos(-0.45, 0.45);
    std::uniform_real_distribution<double> ucol(0.1, 0.95);
    SceneSDF scene;
    int n = un(rng);
    for (int i = 0; i < n; ++i) {
        PrimitiveSDF prim;
        prim.kind = spec.kinds[uk(rng)];
        double s = usize(rng);
        switch (prim.kind) {
            case PrimitiveKind::Sphere: prim.params = {s, 0, 0}; break;
            case PrimitiveKind::Box: prim.params = {s * 0.8, usize(rng) * 0.8, usize(rng) * 0.8}; break;
            case PrimitiveKind::Torus: prim.params = {s, 0.25 * s + 0.03, 0}; break;
            case PrimitiveKind::Capsule: prim.params = {s * 0.8, 0.35 * s + 0.04, 0}; break;
        }
        prim.transform.trans = {upos(rng), upos(rng), upos(rng)};
        prim.color = {ucol(rng), ucol(rng), ucol(rng)};
        scene.primitives.push_back(prim);
    }
    rescale_into_bound(scene, 0.9);
    return scene;
}

SceneSDF generate_editable_scene(Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SceneSDF scene;

    PrimitiveSDF body;
    body.kind = PrimitiveKind::Sphere;
    body.params = {0.38 + 0.04 * u01(rng), 0, 0};
    body.transform.trans = {0, -0.28, 0};
    // body color drawn from a warm palette
    body.color = {0.55 + 0.35 * u01(rng), 0.35 + 0.25 * u01(rng), 0.2 + 0.2 * u01(rng)};
    scene.primitives.push_back(body);

    PrimitiveSDF top;
    double pick = u01(rng);
    if (pick < 1.0 / 3.0) {
        top.kind = PrimitiveKind::Sphere;
        top.params = {0.16 + 0.06 * u01(rng), 0, 0};
    } else if (pick < 2.0 / 3.0) {
        top.kind = PrimitiveKind::Box;
        double s = 0.13 + 0.05 * u01(rng);
        top.params = {s, s, s};
    } else {
        top.kind = PrimitiveKind::Torus;
        top.params = {0.15 + 0.04 * u01(rng), 0.055 + 0.02 * u01(rng), 0};
    }
    top.transform.trans = {0, 0.32, 0};
    top.color = {0.15 + 0.25 * u01(rng), 0.35 + 0.45 * u01(rng), 0.55 + 0.4 * u01(rng)};
    scene.primitives.push_back(top);

    rescale_into_bound(scene, 0.9);
    return scene;
}

geom::BoxOccluder editable_attachment_box() {
    geom::BoxOccluder box;
    box.center = {0, 0.34, 0};
    box.half_extents = {0.3, 0.3, 0.3};
    return box;
}

Camera sample_camera(Rng& rng, int height, int width, double fov_y) {
    std::uniform_real_distribution<double> uaz(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> uel(-M_PI / 3.0, M_PI / 3.0);
    double az = uaz(rng), el = uel(rng);
    double r = 2.2;
    Vec3 eye{r * std::cos(el) * std::cos(az), r * std::sin(el), r * std::cos(el) * std::sin(az)};
    return geom::look_at_camera(eye, Vec3{0, 0, 0}, fov_y, height, width);
}

std::vector<Camera> camera_ring(int n, int height, int width, double elevation_deg, double fov_y,
                                double phase) {
    std::vector<Camera> cams;
    double el = elevation_deg * M_PI / 180.0;
    double r = 2.2;
    for (int i = 0; i < n; ++i) {
        double az = phase + 2.0 * M_PI * i / n;
        // alternate elevations so the ring is not coplanar
        double e = (i % 2 == 0) ? el : -0.4 * el;
        Vec3 eye{r * std::cos(e) * std::cos(az), r * std::sin(e), r * std::cos(e) * std::sin(az)};
        cams.push_back(geom::look_at_camera(eye, Vec3{0, 0, 0}, fov_y, height, width));
    }
    return cams;
}

void save_scene(const std::string& path, const SceneSDF& scene) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << scene.primitives.size() << "\n";
    for (const auto& prim : scene.primitives) {
        f << kind_name(prim.kind);
        for (double v : prim.params) f << " " << v;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f << " " << prim.transform.rot(r, c);
        f << " " << prim.transform.trans.x << " " << prim.transform.trans.y << " "
          << prim.transform.trans.z;
        f << " " << prim.color.x << " " << prim.color.y << " " << prim.color.z << "\n";
    }
}

SceneSDF load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    size_t n = 0;
    f >> n;
    SceneSDF scene;
    scene.primitives.resize(n);
    for (auto& prim : scene.primitives) {
        std::string kind;
        f >> kind;
        prim.kind = kind_from_name(kind);
        for (double& v : prim.params) f >> v;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f >> prim.transform.rot(r, c);
        f >> prim.transform.trans.x >> prim.transform.trans.y >> prim.transform.trans.z;
        f >> prim.color.x >> prim.color.y >> prim.color.z;
    }
    if (!f) throw std::runtime_error("malformed scene file " + path);
    return scene;
}

}  // namespace trirec::scene
