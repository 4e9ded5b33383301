#pragma once

#include <string>
#include <vector>

#include "trirec/model.hpp"
#include "trirec/vecmath.hpp"

namespace trirec::extract {

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> colors;  // optional, per-vertex
};

// Scalar grid over [-1,1]^3; node (i,j,k) at -1 + 2i/(R-1), flat index
// (i + R*(j + R*k)) with i on x, j on y, k on z.
struct ScalarGrid {
    int res = 0;
    std::vector<double> values;

    double at(int i, int j, int k) const {
        return values[static_cast<size_t>(i) + res * (static_cast<size_t>(j) + res * k)];
    }
    Vec3 position(int i, int j, int k) const {
        double step = 2.0 / (res - 1);
        return {-1.0 + i * step, -1.0 + j * step, -1.0 + k * step};
    }
};

// Dense decoded-SDF evaluation (no-grad).
ScalarGrid evaluate_sdf_grid(const model::Model& m, const model::Triplane& planes, int res);

// Standard 256-case marching cubes with linear edge interpolation and
// outward orientation (normals toward positive values). Degenerate
// triangles (area < 1e-12) are dropped; vertices on shared grid edges are
// welded exactly.
Mesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

// Samples decode_rgb at each vertex.
void colorize(Mesh& mesh, const model::Model& m, const model::Triplane& planes);

// Wavefront OBJ; vertex colors (if present) as "v x y z r g b".
void export_obj(const Mesh& mesh, const std::string& path);
Mesh import_obj(const std::string& path);

}  // namespace trirec::extract
