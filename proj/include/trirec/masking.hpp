#pragma once

#include <string>
#include <vector>

#include "trirec/geometry.hpp"
#include "trirec/scene.hpp"

namespace trirec::mask {

using geom::BoxOccluder;
using geom::Camera;
using geom::Rng;

// Boolean per-patch mask for one view, row-major patch order.
struct PatchMask {
    int rows = 0;  // H / patch_size
    int cols = 0;  // W / patch_size
    int patch_size = 0;
    std::vector<uint8_t> flags;

    bool at(int r, int c) const { return flags[static_cast<size_t>(r) * cols + c] != 0; }
    size_t count() const;
    bool any() const { return count() > 0; }
};

// Occluder depth map for one camera (analytic ray-box intersection).
std::vector<double> render_occluder_depth(const BoxOccluder& box, const Camera& cam);

// Pixel occluded iff the occluder is hit strictly in front of the shape
// (background counts as depth +inf, so occluder over empty space occludes).
std::vector<uint8_t> occluded_pixels(const std::vector<double>& shape_depth,
                                     const std::vector<double>& occluder_depth);

// OR-pool pixels into patches.
PatchMask pixels_to_patch_mask(const std::vector<uint8_t>& occluded, int height, int width,
                               int patch_size);

// Per-view masks for all given (non-conditional) cameras; shape depths are
// rendered from the scene per camera.
std::vector<PatchMask> build_view_masks(const scene::SceneSDF& sc, const BoxOccluder& box,
                                        const std::vector<Camera>& cameras, int patch_size);

// As above but reusing precomputed shape depth maps (one per camera).
PatchMask build_view_mask(const std::vector<double>& shape_depth, const BoxOccluder& box,
                          const Camera& cam, int patch_size);

// Ablation mode: floor(ratio * n) patches flagged uniformly without replacement.
PatchMask uniform_random_mask(Rng& rng, int rows, int cols, int patch_size, double ratio);

// One '0'/'1' line per view, row-major patch order.
void save_masks(const std::string& path, const std::vector<PatchMask>& masks);
std::vector<PatchMask> load_masks(const std::string& path, int rows, int cols, int patch_size);

}  // namespace trirec::mask
