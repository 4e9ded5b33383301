#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trirec/dataset.hpp"
#include "trirec/extraction.hpp"
#include "trirec/masking.hpp"
#include "trirec/metrics.hpp"
#include "trirec/model.hpp"
#include "trirec/volren.hpp"

namespace trirec::pipe {

using model::Model;
using model::Triplane;

struct ReconRequest {
    int cond_index = 0;
    std::vector<int> input_views;                // excludes cond_index
    std::optional<geom::BoxOccluder> occluder;   // masks inputs when present
    bool corrupt_cond = false;                   // mask the conditional image fully
};

// Masks from the occluder (if any) + one transformer forward.
Triplane reconstruct(const Model& m, const data::SceneData& scene, const ReconRequest& req);

// Host-side copies of a rendered view.
struct RenderedView {
    int height = 0, width = 0;
    std::vector<Vec3> rgb;
    std::vector<double> opacity;
    std::vector<Vec3> normal;
};

RenderedView to_host(const volren::PredView& pred);

// Renders a full camera image deterministically (midpoint sampling),
// in row bands so the per-band graph stays small.
RenderedView render_full_view(const Model& m, const Triplane& planes, const geom::Camera& cam,
                              int n_samples, bool with_normals = false);

metrics::Image to_image(const std::vector<Vec3>& rgb, int height, int width);

// Pixel-level selector from a patch mask (1 inside flagged patches).
std::vector<uint8_t> mask_pixels(const mask::PatchMask& m);

struct EditRequest {
    int cond_index = 0;
    std::vector<int> input_views;
    std::vector<Vec3> edited_cond_image;  // same resolution as the views
    geom::BoxOccluder edit_box;
};

struct EditResult {
    Triplane planes;
    std::vector<RenderedView> renders;  // one per scene camera
    extract::Mesh mesh;
};

// Single-pass edit: box-derived masks on all non-conditional inputs, edited image
// on the clean conditional branch, single forward pass, render + mesh.
EditResult edit(const Model& m, const data::SceneData& scene, const EditRequest& req,
                int n_samples, int mesh_res);

// Test-data helper: replaces the pixels of `base` whose camera rays intersect
// `box` with the corresponding pixels of a render of `donor`.
std::vector<Vec3> composite_donor(const std::vector<Vec3>& base, const scene::SceneSDF& donor,
                                  const geom::Camera& cam, const geom::BoxOccluder& box);

struct EvalConfig {
    int n_input_views = 4;
    int n_heldout = 10;
    int samples_per_ray = 64;
    std::optional<geom::BoxOccluder> occluder;
    uint64_t seed = 0;
};

// Renders n_heldout fresh poses per scene (disjoint from the dataset poses)
// and accumulates PSNR/SSIM; masked/unmasked PSNR is measured on the input
// poses against their own patch masks.
metrics::EvalReport eval_run(const Model& m, const std::vector<data::SceneData>& scenes,
                             const EvalConfig& cfg);

}  // namespace trirec::pipe
