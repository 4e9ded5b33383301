#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "trirec/training.hpp"

using namespace trirec;
using namespace trirec::train;
namespace fs = std::filesystem;

namespace {

model::ModelConfig tiny_cfg() {
    model::ModelConfig c;
    c.patch_size = 4;
    c.input_res = 8;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 1;
    c.plane_res = 8;
    c.plane_channels = 4;
    c.decode_hidden = 8;
    c.mlp_ratio = 2;
    return c;
}

std::vector<data::SceneData> tiny_scenes(int n, int views, int res, uint64_t seed) {
    std::vector<data::SceneData> out;
    for (int s = 0; s < n; ++s) {
        geom::Rng rng(seed + s);
        data::SceneData sd;
        sd.sdf = scene::generate_random_scene(rng, scene::SceneSpec{});
        sd.cameras = scene::camera_ring(views, res, res);
        for (const auto& cam : sd.cameras) sd.views.push_back(scene::render_ground_truth(sd.sdf, cam));
        out.push_back(std::move(sd));
    }
    return out;
}

TrainConfig tiny_train_cfg(const std::string& out_dir) {
    TrainConfig tc;
    tc.crop_size = 8;
    tc.samples_per_ray = 4;
    tc.n_input_min = 2;
    tc.n_input_max = 2;
    tc.n_supervision = 1;
    tc.batch_size = 1;
    tc.epochs = 1;
    tc.steps_per_epoch = 2;
    tc.warmup_iters = 1;
    tc.out_dir = out_dir;
    return tc;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("learning-rate schedule: warmup, peak, cosine tail") {
    int total = 1000, warmup = 100;
    double peak = 4e-4;
    CHECK(lr_schedule(0, total, warmup, peak) == doctest::Approx(0.0));
    CHECK(lr_schedule(50, total, warmup, peak) == doctest::Approx(peak * 0.5).epsilon(1e-9));
    CHECK(lr_schedule(warmup, total, warmup, peak) == doctest::Approx(peak).epsilon(1e-9));
    // Monotone decay after the peak, ending near zero.
    double prev = peak;
    for (int i = warmup; i <= total; i += 50) {
        double lr = lr_schedule(i, total, warmup, peak);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
    CHECK(lr_schedule(total, total, warmup, peak) < 1e-3 * peak);
    // Halfway through the decay the cosine sits at half the peak.
    int mid = warmup + (total - warmup) / 2;
    CHECK(lr_schedule(mid, total, warmup, peak) == doctest::Approx(peak * 0.5).epsilon(1e-6));
}

TEST_CASE("batch sampling respects structure and masking mode") {
    auto scenes = tiny_scenes(3, 6, 16, 7);
    TrainConfig tc = tiny_train_cfg("unused");
    tc.n_input_min = 2;
    tc.n_input_max = 3;
    tc.batch_size = 2;
    tc.n_supervision = 2;
    tc.crop_size = 8;

    geom::Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Batch b = sample_batch(scenes, rng, tc, 4);
        CHECK(b.n_input_views >= 2);
        CHECK(b.n_input_views <= 3);
        REQUIRE(b.items.size() == 2);
        for (const BatchItem& it : b.items) {
            CHECK(it.scene_index >= 0);
            CHECK(it.scene_index < 3);
            REQUIRE(static_cast<int>(it.input_views.size()) == b.n_input_views);
            REQUIRE(it.input_masks.size() == it.input_views.size());
            std::set<int> seen{it.cond_index};
            for (int v : it.input_views) {
                CHECK(v != it.cond_index);  // the conditional view is never an input
                CHECK(seen.insert(v).second);
                CHECK(v >= 0);
                CHECK(v < 6);
            }
            REQUIRE(it.supervision.size() == 2);
            for (const auto& sup : it.supervision) {
                CHECK(sup.row0 >= 0);
                CHECK(sup.col0 >= 0);
                CHECK(sup.row0 + tc.crop_size <= 16);
                CHECK(sup.col0 + tc.crop_size <= 16);
                CHECK(sup.view_index != it.cond_index);
            }
            // Box masks derive from this item's occluder and view geometry.
            for (size_t k = 0; k < it.input_views.size(); ++k) {
                mask::PatchMask oracle = mask::build_view_mask(
                    scenes[it.scene_index].views[it.input_views[k]].depth, it.occluder,
                    scenes[it.scene_index].cameras[it.input_views[k]], 4);
                CHECK(it.input_masks[k].flags == oracle.flags);
            }
        }
    }

    // Fixed view-count range and the None masking mode.
    tc.n_input_min = tc.n_input_max = 2;
    tc.masking = MaskingMode::None;
    Batch b = sample_batch(scenes, rng, tc, 4);
    CHECK(b.n_input_views == 2);
    for (const BatchItem& it : b.items)
        for (const auto& m : it.input_masks) CHECK(!m.any());

    // Uniform masking honours the requested ratio on the patch grid.
    tc.masking = MaskingMode::Uniform;
    tc.uniform_ratio = 0.25;
    Batch bu = sample_batch(scenes, rng, tc, 4);
    for (const BatchItem& it : bu.items)
        for (const auto& m : it.input_masks) CHECK(m.count() == 4);  // 16 patches * 0.25

    // Determinism: identical generators give identical batches.
    geom::Rng r1(5), r2(5);
    Batch x = sample_batch(scenes, r1, tc, 4);
    Batch y = sample_batch(scenes, r2, tc, 4);
    REQUIRE(x.items.size() == y.items.size());
    CHECK(x.n_input_views == y.n_input_views);
    for (size_t i = 0; i < x.items.size(); ++i) {
        CHECK(x.items[i].scene_index == y.items[i].scene_index);
        CHECK(x.items[i].cond_index == y.items[i].cond_index);
        CHECK(x.items[i].input_views == y.items[i].input_views);
    }

    // Too few views for the requested input count.
    auto small = tiny_scenes(1, 2, 16, 1);
    TrainConfig bad = tc;
    bad.n_input_min = bad.n_input_max = 4;
    geom::Rng r3(1);
    CHECK_THROWS(sample_batch(small, r3, bad, 4));
}

TEST_CASE("AdamW single step matches the hand-computed update") {
    nn::Tensor p = nn::constant({1, 2}, {0.5, -0.3});
    p->requires_grad = true;
    p->grad = {0.2, -0.1};
    AdamW opt;
    opt.beta1 = 0.9;
    opt.beta2 = 0.95;
    opt.eps = 1e-8;
    opt.weight_decay = 0.01;
    opt.init({p});
    double lr = 1e-2;
    opt.step({p}, lr);
    for (int i = 0; i < 2; ++i) {
        double g = (i == 0) ? 0.2 : -0.1;
        double x0 = (i == 0) ? 0.5 : -0.3;
        double m = 0.1 * g, v = 0.05 * g * g;
        double mhat = m / (1 - 0.9), vhat = v / (1 - 0.95);
        double expect = x0 - lr * (mhat / (std::sqrt(vhat) + 1e-8) + 0.01 * x0);
        CHECK(p->value[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("global-norm clipping scales gradients to the budget") {
    nn::Tensor a = nn::constant({1, 2}, {0.0, 0.0});
    nn::Tensor b = nn::constant({1, 1}, {0.0});
    a->requires_grad = b->requires_grad = true;
    a->grad = {3.0, 0.0};
    b->grad = {4.0};
    double pre = clip_global_norm({a, b}, 1.0);
    CHECK(pre == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(a->grad[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(b->grad[0] == doctest::Approx(0.8).epsilon(1e-12));
    // Norm already inside the budget: untouched.
    a->grad = {0.3, 0.0};
    b->grad = {0.4};
    double pre2 = clip_global_norm({a, b}, 1.0);
    CHECK(pre2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a->grad[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("stage defaults: stage two enables normals and lowers the rate") {
    TrainConfig s1;
    s1.stage = 1;
    s1.apply_stage_defaults();
    CHECK(s1.weights.w_normal == 0.0);
    CHECK(s1.samples_per_ray == 32);
    CHECK(s1.peak_lr == doctest::Approx(4e-4));
    TrainConfig s2;
    s2.stage = 2;
    s2.apply_stage_defaults();
    CHECK(s2.weights.w_normal == 1.0);
    CHECK(s2.samples_per_ray == 64);
    CHECK(s2.peak_lr == doctest::Approx(5e-6));
}

TEST_CASE("train config parses from a config map") {
    cfg::ConfigMap c = cfg::ConfigMap::from_string(
        "stage = 2\ncrop_size = 16\nbatch_size = 3\npeak_lr = 1e-5\nmasking = uniform\n"
        "uniform_ratio = 0.5\nw_depth = 0.1\nseed = 42\n");
    TrainConfig tc = train_config_from(c);
    CHECK(tc.stage == 2);
    CHECK(tc.crop_size == 16);
    CHECK(tc.batch_size == 3);
    CHECK(tc.peak_lr == doctest::Approx(1e-5));
    CHECK(tc.masking == MaskingMode::Uniform);
    CHECK(tc.uniform_ratio == doctest::Approx(0.5));
    CHECK(tc.weights.w_depth == doctest::Approx(0.1));
    CHECK(tc.seed == 42);
    CHECK(tc.weights.w_normal == 1.0);  // stage-2 default applied
    CHECK_THROWS(masking_mode_from("sometimes"));
}

TEST_CASE("item_loss is finite and responds to parameters") {
    auto scenes = tiny_scenes(1, 4, 8, 3);
    model::Model m;
    m.cfg = tiny_cfg();
    nn::Rng rng(1);
    m.init(rng);
    TrainConfig tc = tiny_train_cfg("unused");
    geom::Rng batch_rng(2);
    Batch b = sample_batch(scenes, batch_rng, tc, m.cfg.patch_size);
    geom::Rng render_rng(3);
    losses::LossReport rep = item_loss(m, scenes[0], b.items[0], tc, render_rng);
    CHECK(std::isfinite(rep.total_value));
    CHECK(rep.total_value > 0.0);
    nn::backward(rep.total);
    double gsum = 0;
    for (double g : m.p.tri_tokens->grad) gsum += std::fabs(g);
    CHECK(gsum > 0.0);
}

TEST_CASE("a zero-epoch run writes a checkpoint identical to the init state") {
    TempDir dir("trirec_train_zero");
    auto scenes = tiny_scenes(1, 4, 8, 9);
    model::Model m;
    m.cfg = tiny_cfg();
    nn::Rng rng(4);
    m.init(rng);
    std::vector<std::vector<double>> before;
    for (const auto& p : m.parameters()) before.push_back(p->value);
    TrainConfig tc = tiny_train_cfg(dir.str());
    tc.epochs = 0;
    TrainResult res = train_stage(m, scenes, tc);
    CHECK(res.total_steps == 0);
    REQUIRE(fs::exists(res.final_checkpoint));
    model::Model fresh;
    fresh.cfg = tiny_cfg();
    nn::Rng rng2(99);
    fresh.init(rng2);
    nn::load_checkpoint(res.final_checkpoint, fresh.parameters());
    auto params = fresh.parameters();
    for (size_t i = 0; i < params.size(); ++i) CHECK(params[i]->value == before[i]);
}

TEST_CASE("short training run: finite losses, logs, and moving parameters") {
    TempDir dir("trirec_train_short");
    auto scenes = tiny_scenes(1, 4, 8, 11);
    model::Model m;
    m.cfg = tiny_cfg();
    nn::Rng rng(6);
    m.init(rng);
    std::vector<double> tri_before = m.p.tri_tokens->value;
    TrainConfig tc = tiny_train_cfg(dir.str());
    tc.epochs = 1;
    tc.steps_per_epoch = 3;
    tc.warmup_iters = 1;
    TrainResult res = train_stage(m, scenes, tc);
    CHECK(res.total_steps == 3);
    CHECK(std::isfinite(res.final_loss));
    CHECK(fs::exists(fs::path(dir.str()) / "metrics.log"));
    CHECK(fs::exists(res.final_checkpoint));
    double moved = 0;
    for (size_t i = 0; i < tri_before.size(); ++i)
        moved = std::max(moved, std::fabs(tri_before[i] - m.p.tri_tokens->value[i]));
    CHECK(moved > 0.0);
}

TEST_CASE("stage two refuses to start without a resume checkpoint") {
    TempDir dir("trirec_train_s2");
    auto scenes = tiny_scenes(1, 4, 8, 13);
    model::Model m;
    m.cfg = tiny_cfg();
    nn::Rng rng(8);
    m.init(rng);
    TrainConfig tc = tiny_train_cfg(dir.str());
    tc.stage = 2;
    tc.apply_stage_defaults();
    tc.samples_per_ray = 4;  // keep the tiny test fast
    CHECK_THROWS(train_stage(m, scenes, tc));
}
