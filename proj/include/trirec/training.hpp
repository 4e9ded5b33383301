#pragma once

#include <string>
#include <vector>

#include "trirec/config.hpp"
#include "trirec/dataset.hpp"
#include "trirec/losses.hpp"
#include "trirec/masking.hpp"
#include "trirec/model.hpp"

namespace trirec::train {

using nn::Tensor;

enum class MaskingMode { Box, Uniform, None };

MaskingMode masking_mode_from(const std::string& name);

struct TrainConfig {
    int stage = 1;
    int crop_size = 32;        // supervision crop side, pixels
    int samples_per_ray = 32;  // stage-1 default; stage 2 doubles this
    int n_input_min = 3;
    int n_input_max = 4;
    int n_supervision = 2;
    int batch_size = 2;
    int epochs = 4;
    int steps_per_epoch = 0;   // 0 = one pass over the scenes per epoch
    double peak_lr = 4e-4;
    int warmup_iters = 100;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    uint64_t seed = 0;
    MaskingMode masking = MaskingMode::Box;
    double uniform_ratio = 0.25;  // ablation masking
    geom::OccluderSpec occluder;
    losses::LossWeights weights;  // w_normal forced by stage unless overridden
    std::string out_dir = "runs/default";

    // Applies stage-dependent defaults (w_normal, sample count, peak lr).
    void apply_stage_defaults();
    void validate() const;
};

TrainConfig train_config_from(const cfg::ConfigMap& c);

struct SupervisionTarget {
    int view_index = 0;
    int row0 = 0, col0 = 0;
};

struct BatchItem {
    int scene_index = 0;
    int cond_index = 0;
    std::vector<int> input_views;              // excludes cond_index
    std::vector<mask::PatchMask> input_masks;  // parallel to input_views
    geom::BoxOccluder occluder;
    std::vector<SupervisionTarget> supervision;
};

struct Batch {
    std::vector<BatchItem> items;
    int n_input_views = 0;  // drawn once per batch
};

// Draws one batch: per-batch input-view count, one occluder per item, clean
// conditional view, supervision crops at uniform offsets.
Batch sample_batch(const std::vector<data::SceneData>& scenes, geom::Rng& rng,
                   const TrainConfig& cfg, int patch_size);

// Linear warmup to peak over warmup_iters, then cosine decay to 0 at
// total_iters.
double lr_schedule(int iter, int total_iters, int warmup_iters, double peak);

// Decoupled-weight-decay Adam over a fixed parameter list.
struct AdamW {
    double beta1 = 0.9, beta2 = 0.95, eps = 1e-8, weight_decay = 0.01;
    std::vector<std::vector<double>> m, v;
    int64_t t = 0;

    void init(const std::vector<Tensor>& params);
    void step(const std::vector<Tensor>& params, double lr);
};

// Scales gradients so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const std::vector<Tensor>& params, double max_norm);

// Forward + loss for one batch item (graph attached).
losses::LossReport item_loss(const model::Model& m, const data::SceneData& scene,
                             const BatchItem& item, const TrainConfig& cfg, geom::Rng& rng);

struct TrainResult {
    std::string final_checkpoint;
    double final_loss = 0;
    int total_steps = 0;
};

// Runs the staged loop: AdamW over shuffled batches, per-epoch checkpoints,
// one metrics line per step appended to <out_dir>/metrics.log. Stage 2 must
// resume from a checkpoint. Aborts on non-finite loss with a state dump.
TrainResult train_stage(model::Model& m, const std::vector<data::SceneData>& scenes,
                        const TrainConfig& cfg, const std::string& resume_ckpt = "");

}  // namespace trirec::train
