// Overfit acceptance: train the full-size model on a single shape for 2000
// steps and require train-view PSNR >= 28 dB and held-out PSNR >= 24 dB at
// 64x64. Prints one CRITERION line and exits nonzero on failure.
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

std::string fmt(double v, int prec = 2) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

}  // namespace

int main() {
    auto t0 = Clock::now();
    fs::path work = fs::temp_directory_path() / "trirec_accept_overfit";
    fs::remove_all(work);
    fs::create_directories(work);

    // One shape, a ring of posed views at the full working resolution.
    data::DatasetSpec spec;
    spec.n_scenes = 1;
    spec.n_views = 16;
    spec.resolution = 64;
    spec.seed = 77;
    data::generate_dataset((work / "data").string(), spec);
    std::vector<data::SceneData> scenes;
    for (const std::string& d : data::list_scene_dirs((work / "data").string()))
        scenes.push_back(data::load_scene_dir(d));

    model::Model m;  // full-size defaults: patch 8, d_model 128, 4 layers
    nn::Rng rng(78);
    m.init(rng);

    train::TrainConfig tc;
    tc.stage = 1;
    tc.apply_stage_defaults();  // w_normal 0, 32 samples, peak 4e-4
    tc.crop_size = 32;
    // Pure reconstruction capacity is under test here (the inpainting
    // criterion exercises masking), so inputs stay uncorrupted and the input
    // count matches the evaluation protocol.
    tc.masking = train::MaskingMode::None;
    tc.n_input_min = 4;
    tc.n_input_max = 4;
    // Two supervision crops and batch size 1 keep a step inside the
    // single-core time budget; the step count stays at 2000.
    tc.n_supervision = 2;
    tc.batch_size = 1;
    tc.epochs = 1;
    tc.steps_per_epoch = 2000;
    tc.warmup_iters = 100;
    tc.seed = 79;
    tc.out_dir = (work / "run").string();
    train::train_stage(m, scenes, tc);
    double train_time = std::chrono::duration<double>(Clock::now() - t0).count();

    // Train-view PSNR: reconstruct from clean inputs, render every dataset
    // view in full and compare against the ground truth.
    const data::SceneData& sc = scenes[0];
    pipe::ReconRequest req;
    req.cond_index = 0;
    req.input_views = {1, 2, 3, 4};
    model::Triplane planes = pipe::reconstruct(m, sc, req);
    double train_psnr = 0;
    for (size_t v = 0; v < sc.cameras.size(); ++v) {
        pipe::RenderedView rv = pipe::render_full_view(m, planes, sc.cameras[v], 64);
        metrics::Image pred = pipe::to_image(rv.rgb, 64, 64);
        metrics::Image gt = pipe::to_image(sc.views[v].rgb, 64, 64);
        train_psnr += metrics::psnr(pred, gt);
    }
    train_psnr /= static_cast<double>(sc.cameras.size());

    // Held-out PSNR on fresh poses disjoint from the training ring.
    pipe::EvalConfig ec;
    ec.n_input_views = 4;
    ec.n_heldout = 4;
    ec.samples_per_ray = 64;
    ec.seed = 80;
    metrics::EvalReport rep = pipe::eval_run(m, scenes, ec);
    std::ofstream((work / "run" / "eval.csv").string()) << rep.csv();

    double total_time = std::chrono::duration<double>(Clock::now() - t0).count();
    bool ok = train_psnr >= 28.0 && rep.psnr >= 24.0 && total_time < 7200.0;
    std::printf("CRITERION 5 %s: train PSNR %s dB (>= 28), held-out PSNR %s dB (>= 24), "
                "train %s s, total %s s (budget 7200 s)\n",
                ok ? "PASS" : "FAIL", fmt(train_psnr).c_str(), fmt(rep.psnr).c_str(),
                fmt(train_time, 0).c_str(), fmt(total_time, 0).c_str());
    return ok ? 0 : 1;
}
