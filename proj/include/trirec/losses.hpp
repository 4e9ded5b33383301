#pragma once

#include <vector>

#include "trirec/scene.hpp"
#include "trirec/tensor.hpp"
#include "trirec/volren.hpp"

namespace trirec::losses {

using nn::Tensor;

struct LossWeights {
    double w_image = 1.0;
    double w_normal = 0.0;  // 0 in stage 1, 1 in stage 2
    double w_mask = 1.0;
    double w_perceptual = 1.0;
    double w_depth = 0.0;  // ablation only
};

struct LossReport {
    Tensor total;  // graph scalar
    double recon_rgb = 0;
    double recon_normal = 0;
    double recon_mask = 0;
    double perceptual = 0;
    double depth = 0;
    double total_value = 0;
};

// Ground-truth crop in flat arrays (white background already composited in rgb).
struct GTCrop {
    int height = 0, width = 0;
    std::vector<double> rgb;     // h*w*3
    std::vector<double> normal;  // h*w*3 (world space, zero off-silhouette)
    std::vector<double> sil;     // h*w in {0,1}
    std::vector<double> depth;   // h*w (finite only where sil=1)
};

// Renders a GT crop from the analytic scene at the camera's resolution.
GTCrop make_gt_crop(const scene::SceneSDF& sc, const geom::Camera& cam, int row0, int col0,
                    int height, int width);

// Mean L2 differences over a 3-level average-pool pyramid (factors 1,2,4).
Tensor perceptual_loss(const Tensor& pred_rgb, const GTCrop& gt);

// MSE of expected ray depth over silhouette pixels.
Tensor depth_loss(const Tensor& pred_depth, const GTCrop& gt);

// Weighted sum of image/normal/mask (+ perceptual, + optional depth) terms.
LossReport recon_loss(const volren::PredView& pred, const GTCrop& gt, const LossWeights& w);

}  // namespace trirec::losses
