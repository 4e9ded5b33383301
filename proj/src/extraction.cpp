#include "trirec/extraction.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace trirec::extract {

extern const int kMcEdgeTable[256];
extern const int kMcTriTable[256][16];

ScalarGrid evaluate_sdf_grid(const model::Model& m, const model::Triplane& planes, int res) {
    if (res < 2) throw std::invalid_argument("evaluate_sdf_grid: resolution must be >= 2");
    model::NoGradGuard ng(m);
    ScalarGrid grid;
    grid.res = res;
    grid.values.resize(static_cast<size_t>(res) * res * res);
    double step = 2.0 / (res - 1);
    // Evaluate slab by slab to bound peak memory.
    for (int k = 0; k < res; ++k) {
        std::vector<double> pts;
        pts.reserve(static_cast<size_t>(res) * res * 3);
        double z = -1.0 + k * step;
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) {
                pts.push_back(-1.0 + i * step);
                pts.push_back(-1.0 + j * step);
                pts.push_back(z);
            }
        nn::Tensor sdf = model::decode_sdf(m, model::sample_triplane(planes, pts));
        for (size_t n = 0; n < sdf->value.size(); ++n) {
            if (!std::isfinite(sdf->value[n]))
                throw std::runtime_error("evaluate_sdf_grid: non-finite SDF value");
            grid.values[static_cast<size_t>(k) * res * res + n] = sdf->value[n];
        }
    }
    return grid;
}

namespace {

// Bourke cube corner offsets (x,y,z).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Canonical global id for a grid edge: base lattice node + axis.
struct EdgeKey {
    int64_t node;
    int axis;
    bool operator<(const EdgeKey& o) const {
        return node != o.node ? node < o.node : axis < o.axis;
    }
};

double tri_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

}  // namespace

Mesh marching_cubes(const ScalarGrid& grid, double iso) {
    if (grid.res < 2) throw std::invalid_argument("marching_cubes: grid must be >= 2^3");
    int R = grid.res;
    Mesh mesh;
    std::map<EdgeKey, int> edge_vertex;

    auto vertex_on_edge = [&](int ci, int cj, int ck, int edge) -> int {
        const int* a = kCorner[kEdgeCorners[edge][0]];
        const int* b = kCorner[kEdgeCorners[edge][1]];
        int ia = ci + a[0], ja = cj + a[1], ka = ck + a[2];
        int ib = ci + b[0], jb = cj + b[1], kb = ck + b[2];
        // Canonical base node = lexicographically smaller endpoint.
        int axis = ia != ib ? 0 : (ja != jb ? 1 : 2);
        int bi = std::min(ia, ib), bj = std::min(ja, jb), bk = std::min(ka, kb);
        EdgeKey key{bi + static_cast<int64_t>(R) * (bj + static_cast<int64_t>(R) * bk), axis};
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double va = grid.at(ia, ja, ka), vb = grid.at(ib, jb, kb);
        double t = std::fabs(vb - va) < 1e-14 ? 0.5 : (iso - va) / (vb - va);
        t = std::clamp(t, 0.0, 1.0);
        Vec3 pa = grid.position(ia, ja, ka), pb = grid.position(ib, jb, kb);
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, idx);
        return idx;
    };

    for (int k = 0; k + 1 < R; ++k)
        for (int j = 0; j + 1 < R; ++j)
            for (int i = 0; i + 1 < R; ++i) {
                int cube = 0;
                for (int v = 0; v < 8; ++v)
                    if (grid.at(i + kCorner[v][0], j + kCorner[v][1], k + kCorner[v][2]) < iso)
                        cube |= 1 << v;
                if (kMcEdgeTable[cube] == 0) continue;
                const int* tri = kMcTriTable[cube];
                for (int t = 0; tri[t] != -1; t += 3) {
                    int v0 = vertex_on_edge(i, j, k, tri[t]);
                    int v1 = vertex_on_edge(i, j, k, tri[t + 1]);
                    int v2 = vertex_on_edge(i, j, k, tri[t + 2]);
                    if (v0 == v1 || v1 == v2 || v0 == v2) continue;
                    if (tri_area(mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]) < 1e-12)
                        continue;
                    // Table winding points normals toward values below iso;
                    // flip so they face the positive side of the field.
                    mesh.triangles.push_back({v0, v2, v1});
                }
            }
    return mesh;
}

void colorize(Mesh& mesh, const model::Model& m, const model::Triplane& planes) {
    model::NoGradGuard ng(m);
    if (mesh.vertices.empty()) {
        mesh.colors.clear();
        return;
    }
    std::vector<double> pts;
    pts.reserve(mesh.vertices.size() * 3);
    for (const auto& v : mesh.vertices) {
        pts.push_back(v.x);
        pts.push_back(v.y);
        pts.push_back(v.z);
    }
    nn::Tensor rgb = model::decode_rgb(m, model::sample_triplane(planes, pts));
    mesh.colors.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.colors.size(); ++i)
        mesh.colors[i] = {rgb->value[i * 3], rgb->value[i * 3 + 1], rgb->value[i * 3 + 2]};
}

void export_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(9);
    f << "# trirec mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
      << " triangles\n";
    bool colored = mesh.colors.size() == mesh.vertices.size() && !mesh.vertices.empty();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        f << "v " << v.x << " " << v.y << " " << v.z;
        if (colored) {
            const Vec3& c = mesh.colors[i];
            f << " " << c.x << " " << c.y << " " << c.z;
        }
        f << "\n";
    }
    for (const auto& t : mesh.triangles)
        f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

Mesh import_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    Mesh mesh;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v, c;
            ls >> v.x >> v.y >> v.z;
            if (ls >> c.x >> c.y >> c.z) mesh.colors.push_back(c);
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t{};
            ls >> t[0] >> t[1] >> t[2];
            for (int& v : t) --v;
            mesh.triangles.push_back(t);
        }
    }
    return mesh;
}

}  // namespace trirec::extract
