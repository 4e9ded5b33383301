// Ablation acceptance (direction-only comparisons on a reduced setup):
//
// 7a: training with the normal term disabled throughout must give a worse
//     held-out normal MSE than the two-stage schedule that enables it.
// 7b: training with uniform random patch masking must give a worse masked
//     PSNR under box-occluder test masks than training with box masking.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trirec/pipeline.hpp"
#include "trirec/training.hpp"

using namespace trirec;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

void report(const char* crit, bool pass, const std::string& detail) {
    std::printf("CRITERION %s %s: %s\n", crit, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

model::ModelConfig reduced_cfg() {
    model::ModelConfig c;
    c.patch_size = 4;
    c.input_res = 32;
    c.d_model = 64;
    c.n_heads = 4;
    c.n_layers = 2;
    c.plane_res = 16;
    c.plane_channels = 8;
    c.decode_hidden = 32;
    c.mlp_ratio = 4;
    return c;
}

train::TrainConfig base_train_cfg(const std::string& out_dir, int steps) {
    train::TrainConfig tc;
    tc.stage = 1;
    tc.apply_stage_defaults();
    tc.crop_size = 16;
    tc.samples_per_ray = 16;
    tc.n_input_min = 3;
    tc.n_input_max = 3;
    tc.n_supervision = 1;
    tc.batch_size = 1;
    tc.epochs = 1;
    tc.steps_per_epoch = steps;
    tc.warmup_iters = 50;
    tc.seed = 7;
    tc.out_dir = out_dir;
    return tc;
}

// Held-out normal MSE over silhouette pixels of fresh poses.
double heldout_normal_mse(const model::Model& m, const std::vector<data::SceneData>& scenes,
                          uint64_t seed) {
    geom::Rng rng(seed);
    double acc = 0;
    int n = 0;
    for (const data::SceneData& sc : scenes) {
        pipe::ReconRequest req;
        req.cond_index = 0;
        req.input_views = {1, 2, 3};
        model::Triplane planes = pipe::reconstruct(m, sc, req);
        for (int h = 0; h < 2; ++h) {
            geom::Camera cam = scene::sample_camera(rng, 32, 32);
            scene::GTView gt = scene::render_ground_truth(sc.sdf, cam);
            pipe::RenderedView rv = pipe::render_full_view(m, planes, cam, 32, true);
            double sum = 0;
            int count = 0;
            for (size_t i = 0; i < gt.sil.size(); ++i) {
                if (!gt.sil[i]) continue;
                Vec3 d = rv.normal[i] - gt.normal[i];
                sum += dot(d, d);
                ++count;
            }
            if (count > 0) {
                acc += sum / (3.0 * count);
                ++n;
            }
        }
    }
    return n > 0 ? acc / n : 0.0;
}

// Masked PSNR under box-occluder test masks (the deployment masking family).
double box_masked_psnr(const model::Model& m, const std::vector<data::SceneData>& scenes,
                       uint64_t seed) {
    geom::Rng rng(seed);
    geom::OccluderSpec spec;
    double acc = 0;
    int n = 0;
    for (const data::SceneData& sc : scenes) {
        pipe::ReconRequest req;
        req.cond_index = 0;
        req.input_views = {1, 2, 3};
        req.occluder = geom::sample_box_occluder(rng, spec);
        model::Triplane planes = pipe::reconstruct(m, sc, req);
        for (int v : req.input_views) {
            mask::PatchMask pm = mask::build_view_mask(sc.views[static_cast<size_t>(v)].depth,
                                                       *req.occluder,
                                                       sc.cameras[static_cast<size_t>(v)],
                                                       m.cfg.patch_size);
            if (!pm.any()) continue;
            pipe::RenderedView rv =
                pipe::render_full_view(m, planes, sc.cameras[static_cast<size_t>(v)], 32);
            metrics::Image pred = pipe::to_image(rv.rgb, rv.height, rv.width);
            metrics::Image gt =
                pipe::to_image(sc.views[static_cast<size_t>(v)].rgb, rv.height, rv.width);
            acc += metrics::psnr_masked(pred, gt, pipe::mask_pixels(pm));
            ++n;
        }
    }
    return n > 0 ? acc / n : 0.0;
}

}  // namespace

int main() {
    auto t0 = Clock::now();
    fs::path work = fs::temp_directory_path() / "trirec_accept_ablation";
    fs::remove_all(work);
    fs::create_directories(work);

    data::DatasetSpec spec;
    spec.n_scenes = 8;
    spec.n_views = 6;
    spec.resolution = 32;
    spec.seed = 55;
    data::generate_dataset((work / "data").string(), spec);
    std::vector<data::SceneData> scenes;
    for (const std::string& d : data::list_scene_dirs((work / "data").string()))
        scenes.push_back(data::load_scene_dir(d));
    std::vector<data::SceneData> test(scenes.begin(), scenes.begin() + 4);

    const int stage1_steps = 600, stage2_steps = 200;

    // --- 7a: normal-loss schedule --------------------------------------------
    // A: normal weight zero throughout (stage-1 settings for all steps).
    model::Model ma;
    ma.cfg = reduced_cfg();
    nn::Rng ra(1);
    ma.init(ra);
    train::TrainConfig ta = base_train_cfg((work / "run_a").string(), stage1_steps + stage2_steps);
    train::train_stage(ma, scenes, ta);

    // B: the two-stage schedule; stage 2 turns the normal term on.
    model::Model mb;
    mb.cfg = reduced_cfg();
    nn::Rng rb(1);
    mb.init(rb);
    train::TrainConfig tb1 = base_train_cfg((work / "run_b1").string(), stage1_steps);
    train::TrainResult res1 = train_stage(mb, scenes, tb1);
    train::TrainConfig tb2 = base_train_cfg((work / "run_b2").string(), stage2_steps);
    tb2.stage = 2;
    tb2.apply_stage_defaults();
    tb2.crop_size = 16;
    tb2.samples_per_ray = 32;  // doubled from the reduced stage-1 setting
    tb2.steps_per_epoch = stage2_steps;
    train::train_stage(mb, scenes, tb2, res1.final_checkpoint);

    double mse_a = heldout_normal_mse(ma, test, 2001);
    double mse_b = heldout_normal_mse(mb, test, 2001);
    report("7a", mse_b < mse_a,
           "held-out normal MSE: no-normal-term " + fmt(mse_a) + " vs two-stage " + fmt(mse_b) +
               " (two-stage must be lower)");

    // --- 7b: masking family --------------------------------------------------
    model::Model mc;
    mc.cfg = reduced_cfg();
    nn::Rng rc(1);
    mc.init(rc);
    train::TrainConfig tc = base_train_cfg((work / "run_c").string(), stage1_steps);
    tc.masking = train::MaskingMode::Uniform;
    tc.uniform_ratio = 0.25;
    train::train_stage(mc, scenes, tc);

    model::Model md;
    md.cfg = reduced_cfg();
    nn::Rng rd(1);
    md.init(rd);
    train::TrainConfig td = base_train_cfg((work / "run_d").string(), stage1_steps);
    td.masking = train::MaskingMode::Box;
    train::train_stage(md, scenes, td);

    double psnr_uniform = box_masked_psnr(mc, test, 3001);
    double psnr_box = box_masked_psnr(md, test, 3001);
    report("7b", psnr_box > psnr_uniform,
           "box-mask test PSNR: uniform-trained " + fmt(psnr_uniform, 2) + " dB vs box-trained " +
               fmt(psnr_box, 2) + " dB (box-trained must be higher)");

    double total = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("total %.0f s (budget 14400 s)\n", total);
    return g_failures > 0 ? 1 : 0;
}
