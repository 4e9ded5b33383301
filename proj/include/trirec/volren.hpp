#pragma once

#include <vector>

#include "trirec/geometry.hpp"
#include "trirec/model.hpp"
#include "trirec/tensor.hpp"

namespace trirec::volren {

using model::Model;
using model::Triplane;
using nn::Tensor;

enum class SampleMode { StratifiedJitter, Midpoint };

// sigma = alpha * Psi_beta(-s), Psi the zero-mean Laplace CDF, alpha = 1/beta.
// s: any shape; beta: scalar tensor (1,1), positive.
Tensor sdf_to_density(const Tensor& s, const Tensor& beta);

struct CropRect {
    int row0 = 0, col0 = 0, height = 0, width = 0;
};

// Rendered prediction over a pixel block; tensors stay attached to the graph.
struct PredView {
    int height = 0, width = 0;
    Tensor rgb;      // (h*w, 3), white background composited
    Tensor opacity;  // (h*w, 1)
    Tensor normal;   // (h*w, 3), opacity-weighted; zero when normals disabled
    Tensor depth;    // (h*w, 1), expected ray depth (eps-guarded)
    bool has_normals = false;
};

struct RenderOptions {
    int n_samples = 32;
    SampleMode mode = SampleMode::Midpoint;
    bool with_normals = false;
    double normal_step = 1e-3;
    nn::Rng* rng = nullptr;  // required for stratified mode
    // When set, integrate every ray over [t_near, t_far] instead of the
    // [-1,1]^3 intersection (misses then render as background).
    bool use_fixed_range = false;
    double t_near = 0.0;
    double t_far = 1.0;
};

// Renders a batch of explicit rays (origins/dirs, unit dirs assumed).
PredView render_rays(const Model& m, const Triplane& planes, const std::vector<Vec3>& origins,
                     const std::vector<Vec3>& dirs, const RenderOptions& opt);

// Renders the camera pixels inside crop (camera resolution defines the grid).
PredView render_view(const Model& m, const Triplane& planes, const geom::Camera& cam,
                     const CropRect& crop, const RenderOptions& opt);

// Single ray convenience wrapper: returns (rgb, opacity) values.
void render_ray(const Model& m, const Triplane& planes, const Vec3& origin, const Vec3& dir,
                int n_samples, double t_near, double t_far, Vec3& rgb_out, double& opacity_out);

// SDF gradient direction at p from central differences of the decoded field
// (graph-attached; usable inside the training objective).
Vec3 estimate_normal(const Model& m, const Triplane& planes, const Vec3& p, double step = 1e-3);

}  // namespace trirec::volren
