#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "trirec/extraction.hpp"

using namespace trirec;
using namespace trirec::extract;

namespace {

ScalarGrid sphere_grid(int res, double radius) {
    ScalarGrid g;
    g.res = res;
    g.values.resize(static_cast<size_t>(res) * res * res);
    for (int k = 0; k < res; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i)
                g.values[static_cast<size_t>(i) + res * (static_cast<size_t>(j) + res * k)] =
                    norm(g.position(i, j, k)) - radius;
    return g;
}

// Every undirected edge of a closed orientable 2-manifold triangle mesh is
// shared by exactly two triangles, once in each direction.
bool is_closed_manifold(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> directed;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            if (a == b) return false;
            ++directed[{a, b}];
        }
    for (const auto& [edge, count] : directed) {
        if (count != 1) return false;
        auto rev = directed.find({edge.second, edge.first});
        if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
}

model::Model tiny_model(uint64_t seed) {
    model::Model m;
    m.cfg.patch_size = 4;
    m.cfg.input_res = 8;
    m.cfg.d_model = 8;
    m.cfg.n_heads = 2;
    m.cfg.n_layers = 1;
    m.cfg.plane_res = 8;
    m.cfg.plane_channels = 4;
    m.cfg.decode_hidden = 8;
    m.cfg.mlp_ratio = 2;
    nn::Rng rng(seed);
    m.init(rng);
    return m;
}

model::Triplane random_planes(const model::Model& m, uint64_t seed) {
    nn::Rng rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    model::Triplane t;
    t.res = m.cfg.plane_res;
    t.channels = m.cfg.plane_channels;
    auto mk = [&] {
        std::vector<double> v(static_cast<size_t>(t.res) * t.res * t.channels);
        for (double& x : v) x = u(rng);
        return nn::constant({static_cast<int64_t>(t.res) * t.res, t.channels}, v);
    };
    t.xy = mk();
    t.yz = mk();
    t.xz = mk();
    return t;
}

}  // namespace

TEST_CASE("an all-positive field produces an empty mesh") {
    ScalarGrid g;
    g.res = 8;
    g.values.assign(512, 1.0);
    Mesh mesh = marching_cubes(g);
    CHECK(mesh.vertices.empty());
    CHECK(mesh.triangles.empty());
}

TEST_CASE("analytic sphere: vertices near the surface, mesh closed") {
    int res = 64;
    double radius = 0.5;
    ScalarGrid g = sphere_grid(res, radius);
    Mesh mesh = marching_cubes(g);
    REQUIRE(!mesh.vertices.empty());
    double cell_diag = 2.0 * std::sqrt(3.0) / (res - 1);
    for (const Vec3& v : mesh.vertices) CHECK(std::fabs(norm(v) - radius) <= cell_diag);
    CHECK(is_closed_manifold(mesh));
}

TEST_CASE("triangles are oriented with normals toward positive values") {
    // For d(p) = |p| - r, the outward normal points away from the origin, so
    // the cross product of each triangle's edges should align with its
    // centroid direction.
    ScalarGrid g = sphere_grid(32, 0.6);
    Mesh mesh = marching_cubes(g);
    REQUIRE(!mesh.triangles.empty());
    int aligned = 0;
    for (const auto& t : mesh.triangles) {
        Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        Vec3 n = cross(b - a, c - a);
        Vec3 centroid = (1.0 / 3.0) * (a + b + c);
        if (dot(n, centroid) > 0) ++aligned;
    }
    CHECK(aligned == static_cast<int>(mesh.triangles.size()));

    // Negating the field flips every triangle's orientation.
    ScalarGrid neg = g;
    for (double& v : neg.values) v = -v;
    Mesh flipped = marching_cubes(neg);
    REQUIRE(flipped.triangles.size() == mesh.triangles.size());
    int inward = 0;
    for (const auto& t : flipped.triangles) {
        Vec3 a = flipped.vertices[t[0]], b = flipped.vertices[t[1]], c = flipped.vertices[t[2]];
        if (dot(cross(b - a, c - a), (1.0 / 3.0) * (a + b + c)) < 0) ++inward;
    }
    CHECK(inward == static_cast<int>(flipped.triangles.size()));
}

TEST_CASE("vertices lie on grid edges and are welded") {
    ScalarGrid g = sphere_grid(16, 0.55);
    Mesh mesh = marching_cubes(g);
    double step = 2.0 / (g.res - 1);
    for (const Vec3& v : mesh.vertices) {
        // On a grid edge, at least two of the three coordinates sit exactly on
        // grid planes.
        int on_plane = 0;
        for (double c : {v.x, v.y, v.z}) {
            double idx = (c + 1.0) / step;
            if (std::fabs(idx - std::round(idx)) < 1e-9) ++on_plane;
        }
        CHECK(on_plane >= 2);
    }
    // Welding: no two distinct vertices coincide.
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        for (size_t j = i + 1; j < mesh.vertices.size(); ++j)
            CHECK(norm(mesh.vertices[i] - mesh.vertices[j]) > 1e-12);
    // Every vertex is referenced by some triangle.
    std::vector<int> used(mesh.vertices.size(), 0);
    for (const auto& t : mesh.triangles)
        for (int k : t) used[k] = 1;
    for (int u : used) CHECK(u == 1);
}

TEST_CASE("nonzero iso level shifts the extracted radius") {
    ScalarGrid g = sphere_grid(48, 0.5);
    Mesh mesh = marching_cubes(g, 0.2);  // |p| - 0.5 = 0.2 -> radius 0.7
    REQUIRE(!mesh.vertices.empty());
    double cell_diag = 2.0 * std::sqrt(3.0) / 47.0;
    for (const Vec3& v : mesh.vertices) CHECK(std::fabs(norm(v) - 0.7) <= cell_diag);
}

TEST_CASE("evaluate_sdf_grid matches pointwise decoding") {
    model::Model m = tiny_model(1);
    model::Triplane planes = random_planes(m, 2);
    int res = 5;
    ScalarGrid g = evaluate_sdf_grid(m, planes, res);
    REQUIRE(g.res == res);
    REQUIRE(g.values.size() == static_cast<size_t>(res) * res * res);
    model::NoGradGuard guard(m);
    nn::Rng rng(3);
    std::uniform_int_distribution<int> pick(0, res - 1);
    for (int s = 0; s < 30; ++s) {
        int i = pick(rng), j = pick(rng), k = pick(rng);
        Vec3 p = g.position(i, j, k);
        nn::Tensor lat = model::sample_triplane(planes, {p.x, p.y, p.z});
        double sdf = model::decode_sdf(m, lat)->value[0];
        CHECK(g.at(i, j, k) == doctest::Approx(sdf).epsilon(1e-12));
    }
    // Grid corners map to the cube corners.
    CHECK(norm(g.position(0, 0, 0) - Vec3(-1, -1, -1)) < 1e-15);
    CHECK(norm(g.position(res - 1, res - 1, res - 1) - Vec3(1, 1, 1)) < 1e-15);
}

TEST_CASE("OBJ export/import round-trips geometry and colors") {
    ScalarGrid g = sphere_grid(12, 0.6);
    Mesh mesh = marching_cubes(g);
    REQUIRE(!mesh.vertices.empty());
    mesh.colors.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.colors.size(); ++i)
        mesh.colors[i] = Vec3(0.1 + 0.0001 * i, 0.5, 0.9);
    std::string path = "test_mesh_roundtrip.obj";
    export_obj(mesh, path);
    Mesh back = import_obj(path);
    std::remove(path.c_str());
    REQUIRE(back.vertices.size() == mesh.vertices.size());
    REQUIRE(back.triangles.size() == mesh.triangles.size());
    REQUIRE(back.colors.size() == mesh.colors.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        CHECK(norm(back.vertices[i] - mesh.vertices[i]) < 1e-6);
        CHECK(norm(back.colors[i] - mesh.colors[i]) < 1e-6);
    }
    for (size_t i = 0; i < mesh.triangles.size(); ++i) CHECK(back.triangles[i] == mesh.triangles[i]);
}

TEST_CASE("colorize samples the rgb head at each vertex") {
    model::Model m = tiny_model(4);
    model::Triplane planes = random_planes(m, 5);
    ScalarGrid g = sphere_grid(10, 0.5);
    Mesh mesh = marching_cubes(g);
    REQUIRE(!mesh.vertices.empty());
    colorize(mesh, m, planes);
    REQUIRE(mesh.colors.size() == mesh.vertices.size());
    model::NoGradGuard guard(m);
    for (size_t i = 0; i < std::min<size_t>(mesh.vertices.size(), 20); ++i) {
        const Vec3& p = mesh.vertices[i];
        nn::Tensor lat = model::sample_triplane(planes, {p.x, p.y, p.z});
        nn::Tensor rgb = model::decode_rgb(m, lat);
        CHECK(mesh.colors[i].x == doctest::Approx(rgb->value[0]).epsilon(1e-12));
        CHECK(mesh.colors[i].y == doctest::Approx(rgb->value[1]).epsilon(1e-12));
        CHECK(mesh.colors[i].z == doctest::Approx(rgb->value[2]).epsilon(1e-12));
    }
}
