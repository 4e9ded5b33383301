#include "trirec/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "trirec/volren.hpp"

namespace trirec::train {

namespace fs = std::filesystem;

MaskingMode masking_mode_from(const std::string& name) {
    if (name == "box") return MaskingMode::Box;
    if (name == "uniform") return MaskingMode::Uniform;
    if (name == "none") return MaskingMode::None;
    throw std::invalid_argument("unknown masking mode: " + name);
}

void TrainConfig::apply_stage_defaults() {
    if (stage == 1) {
        weights.w_normal = 0.0;
        samples_per_ray = 32;
        peak_lr = 4e-4;
    } else if (stage == 2) {
        weights.w_normal = 1.0;
        samples_per_ray = 64;
        peak_lr = 5e-6;
    } else {
        throw std::invalid_argument("stage must be 1 or 2");
    }
}

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
    if (crop_size < 8) throw std::invalid_argument("crop_size too small");
    if (samples_per_ray < 2) throw std::invalid_argument("samples_per_ray too small");
    if (n_input_min < 1 || n_input_max < n_input_min)
        throw std::invalid_argument("bad input-view range");
    if (n_supervision < 1) throw std::invalid_argument("n_supervision must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (peak_lr <= 0) throw std::invalid_argument("peak_lr must be positive");
    if (warmup_iters < 1) throw std::invalid_argument("warmup_iters must be >= 1");
    if (uniform_ratio < 0 || uniform_ratio > 1)
        throw std::invalid_argument("uniform_ratio out of [0,1]");
    if (grad_clip <= 0) throw std::invalid_argument("grad_clip must be positive");
}

TrainConfig train_config_from(const cfg::ConfigMap& c) {
    TrainConfig t;
    t.stage = c.get_int("stage", t.stage);
    t.apply_stage_defaults();
    t.crop_size = c.get_int("crop_size", t.crop_size);
    t.samples_per_ray = c.get_int("samples_per_ray", t.samples_per_ray);
    t.n_input_min = c.get_int("n_input_min", t.n_input_min);
    t.n_input_max = c.get_int("n_input_max", t.n_input_max);
    t.n_supervision = c.get_int("n_supervision", t.n_supervision);
    t.batch_size = c.get_int("batch_size", t.batch_size);
    t.epochs = c.get_int("epochs", t.epochs);
    t.steps_per_epoch = c.get_int("steps_per_epoch", t.steps_per_epoch);
    t.peak_lr = c.get_double("peak_lr", t.peak_lr);
    t.warmup_iters = c.get_int("warmup_iters", t.warmup_iters);
    t.beta1 = c.get_double("adam_beta1", t.beta1);
    t.beta2 = c.get_double("adam_beta2", t.beta2);
    t.weight_decay = c.get_double("weight_decay", t.weight_decay);
    t.grad_clip = c.get_double("grad_clip", t.grad_clip);
    t.seed = static_cast<uint64_t>(c.get_int("seed", static_cast<int>(t.seed)));
    t.masking = masking_mode_from(c.get_string("masking", "box"));
    t.uniform_ratio = c.get_double("uniform_ratio", t.uniform_ratio);
    t.occluder.len_min = c.get_double("occluder_len_min", t.occluder.len_min);
    t.occluder.len_max = c.get_double("occluder_len_max", t.occluder.len_max);
    t.weights.w_image = c.get_double("w_image", t.weights.w_image);
    t.weights.w_normal = c.get_double("w_normal", t.weights.w_normal);
    t.weights.w_mask = c.get_double("w_mask", t.weights.w_mask);
    t.weights.w_perceptual = c.get_double("w_perceptual", t.weights.w_perceptual);
    t.weights.w_depth = c.get_double("w_depth", t.weights.w_depth);
    t.out_dir = c.get_string("out_dir", t.out_dir);
    t.validate();
    return t;
}

Batch sample_batch(const std::vector<data::SceneData>& scenes, geom::Rng& rng,
                   const TrainConfig& cfg, int patch_size) {
    if (scenes.empty()) throw std::invalid_argument("sample_batch: no scenes");
    Batch batch;
    std::uniform_int_distribution<int> view_count(cfg.n_input_min, cfg.n_input_max);
    batch.n_input_views = view_count(rng);
    int needed = 1 + batch.n_input_views + cfg.n_supervision;

    std::uniform_int_distribution<size_t> scene_pick(0, scenes.size() - 1);
    for (int b = 0; b < cfg.batch_size; ++b) {
        BatchItem item;
        item.scene_index = static_cast<int>(scene_pick(rng));
        const data::SceneData& sc = scenes[static_cast<size_t>(item.scene_index)];
        int n_views = static_cast<int>(sc.cameras.size());
        if (n_views < needed)
            throw std::runtime_error("sample_batch: scene has too few views (" +
                                     std::to_string(n_views) + " < " + std::to_string(needed) +
                                     ")");
        std::vector<int> order(static_cast<size_t>(n_views));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        item.cond_index = order[0];
        item.input_views.assign(order.begin() + 1, order.begin() + 1 + batch.n_input_views);

        const geom::Camera& cam0 = sc.cameras[0];
        int res = cam0.height;
        int prows = res / patch_size;
        if (cfg.masking == MaskingMode::Box) {
            item.occluder = geom::sample_box_occluder(rng, cfg.occluder);
            for (int vi : item.input_views)
                item.input_masks.push_back(mask::build_view_mask(
                    sc.views[static_cast<size_t>(vi)].depth, item.occluder,
                    sc.cameras[static_cast<size_t>(vi)], patch_size));
        } else if (cfg.masking == MaskingMode::Uniform) {
            for (size_t i = 0; i < item.input_views.size(); ++i)
                item.input_masks.push_back(
                    mask::uniform_random_mask(rng, prows, prows, patch_size, cfg.uniform_ratio));
        } else {
            for (size_t i = 0; i < item.input_views.size(); ++i) {
                mask::PatchMask m;
                m.rows = prows;
                m.cols = prows;
                m.patch_size = patch_size;
                m.flags.assign(static_cast<size_t>(prows) * prows, 0);
                item.input_masks.push_back(m);
            }
        }

        std::uniform_int_distribution<int> offset(0, res - cfg.crop_size);
        for (int s = 0; s < cfg.n_supervision; ++s) {
            SupervisionTarget tgt;
            tgt.view_index = order[static_cast<size_t>(1 + batch.n_input_views + s)];
            tgt.row0 = offset(rng);
            tgt.col0 = offset(rng);
            item.supervision.push_back(tgt);
        }
        batch.items.push_back(std::move(item));
    }
    return batch;
}

double lr_schedule(int iter, int total_iters, int warmup_iters, double peak) {
    if (iter < 0) throw std::invalid_argument("lr_schedule: negative iter");
    if (iter < warmup_iters) return peak * static_cast<double>(iter) / warmup_iters;
    if (iter >= total_iters) return 0.0;
    double progress =
        static_cast<double>(iter - warmup_iters) / std::max(1, total_iters - warmup_iters);
    return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void AdamW::init(const std::vector<Tensor>& params) {
    m.clear();
    v.clear();
    for (const Tensor& p : params) {
        m.emplace_back(p->value.size(), 0.0);
        v.emplace_back(p->value.size(), 0.0);
    }
    t = 0;
}

void AdamW::step(const std::vector<Tensor>& params, double lr) {
    if (m.size() != params.size()) throw std::runtime_error("AdamW not initialized");
    ++t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        nn::Node& p = *params[i];
        if (p.grad.empty()) continue;
        for (size_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad[j];
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
            double mhat = m[i][j] / bc1;
            double vhat = v[i][j] / bc2;
            p.value[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.value[j]);
        }
    }
}

double clip_global_norm(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (const Tensor& p : params)
        for (double g : p->grad) sq += g * g;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (const Tensor& p : params)
            for (double& g : p->grad) g *= scale;
    }
    return norm;
}

losses::LossReport item_loss(const model::Model& m, const data::SceneData& scene,
                             const BatchItem& item, const TrainConfig& cfg, geom::Rng& rng) {
    std::vector<model::ViewInput> inputs;
    for (size_t i = 0; i < item.input_views.size(); ++i) {
        size_t vi = static_cast<size_t>(item.input_views[i]);
        model::ViewInput in;
        in.image = model::rgb_grid(scene.views[vi].rgb);
        in.camera = scene.cameras[vi];
        in.mask = item.input_masks[i];
        inputs.push_back(std::move(in));
    }
    model::ViewInput cond;
    size_t ci = static_cast<size_t>(item.cond_index);
    cond.image = model::rgb_grid(scene.views[ci].rgb);
    cond.camera = scene.cameras[ci];

    model::Triplane planes = model::forward_to_triplane(m, inputs, cond);

    volren::RenderOptions opt;
    opt.n_samples = cfg.samples_per_ray;
    opt.mode = volren::SampleMode::StratifiedJitter;
    opt.rng = &rng;
    opt.with_normals = cfg.weights.w_normal != 0.0;

    losses::LossReport agg;
    Tensor total;
    for (const SupervisionTarget& tgt : item.supervision) {
        const geom::Camera& cam = scene.cameras[static_cast<size_t>(tgt.view_index)];
        volren::CropRect crop{tgt.row0, tgt.col0, cfg.crop_size, cfg.crop_size};
        volren::PredView pred = volren::render_view(m, planes, cam, crop, opt);
        losses::GTCrop gt = losses::make_gt_crop(scene.sdf, cam, tgt.row0, tgt.col0,
                                                 cfg.crop_size, cfg.crop_size);
        losses::LossReport r = losses::recon_loss(pred, gt, cfg.weights);
        total = total ? nn::add(total, r.total) : r.total;
        agg.recon_rgb += r.recon_rgb;
        agg.recon_normal += r.recon_normal;
        agg.recon_mask += r.recon_mask;
        agg.perceptual += r.perceptual;
        agg.depth += r.depth;
    }
    double inv = 1.0 / static_cast<double>(item.supervision.size());
    agg.total = nn::mul_scalar(total, inv);
    agg.recon_rgb *= inv;
    agg.recon_normal *= inv;
    agg.recon_mask *= inv;
    agg.perceptual *= inv;
    agg.depth *= inv;
    agg.total_value = agg.total->value[0];
    return agg;
}

namespace {

void dump_state(const std::string& path, const model::Model& m, int step, double loss) {
    std::ofstream out(path);
    out << "non-finite loss at step " << step << " value " << loss << "\n";
    for (const Tensor& p : m.parameters()) {
        double vmin = 0, vmax = 0, gmax = 0;
        if (!p->value.empty()) {
            vmin = *std::min_element(p->value.begin(), p->value.end());
            vmax = *std::max_element(p->value.begin(), p->value.end());
        }
        for (double g : p->grad) gmax = std::max(gmax, std::abs(g));
        out << p->name << " value[" << vmin << "," << vmax << "] |grad|max " << gmax << "\n";
    }
}

}  // namespace

TrainResult train_stage(model::Model& m, const std::vector<data::SceneData>& scenes,
                        const TrainConfig& cfg, const std::string& resume_ckpt) {
    cfg.validate();
    if (cfg.stage == 2 && resume_ckpt.empty())
        throw std::runtime_error("stage 2 requires a stage-1 checkpoint");
    if (!resume_ckpt.empty()) {
        if (!nn::checkpoint_exists(resume_ckpt))
            throw std::runtime_error("checkpoint not found: " + resume_ckpt);
        nn::load_checkpoint(resume_ckpt, m.parameters());
    }
    fs::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir + "/metrics.log", std::ios::app);
    if (!log) throw std::runtime_error("cannot open metrics log in " + cfg.out_dir);

    std::vector<Tensor> params = m.parameters();
    AdamW opt;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.weight_decay = cfg.weight_decay;
    opt.init(params);

    int steps_per_epoch = cfg.steps_per_epoch > 0
                              ? cfg.steps_per_epoch
                              : std::max(1, static_cast<int>(scenes.size()) / cfg.batch_size);
    int total_iters = cfg.epochs * steps_per_epoch;
    geom::Rng rng(cfg.seed);

    TrainResult result;
    int step = 0;
    double last_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int s = 0; s < steps_per_epoch; ++s, ++step) {
            Batch batch = sample_batch(scenes, rng, cfg, m.cfg.patch_size);
            nn::zero_grad(params);
            losses::LossReport sums;
            double batch_loss = 0.0;
            // One backward per item keeps peak graph memory at a single item.
            for (const BatchItem& item : batch.items) {
                losses::LossReport r =
                    item_loss(m, scenes[static_cast<size_t>(item.scene_index)], item, cfg, rng);
                Tensor scaled = nn::mul_scalar(r.total, 1.0 / batch.items.size());
                nn::backward(scaled);
                batch_loss += r.total_value / batch.items.size();
                sums.recon_rgb += r.recon_rgb / batch.items.size();
                sums.recon_normal += r.recon_normal / batch.items.size();
                sums.recon_mask += r.recon_mask / batch.items.size();
                sums.perceptual += r.perceptual / batch.items.size();
                sums.depth += r.depth / batch.items.size();
            }
            if (!std::isfinite(batch_loss)) {
                std::string dump = cfg.out_dir + "/abort_state.txt";
                dump_state(dump, m, step, batch_loss);
                throw std::runtime_error("non-finite loss at step " + std::to_string(step) +
                                         "; state dumped to " + dump);
            }
            double norm = clip_global_norm(params, cfg.grad_clip);
            double lr = lr_schedule(step, total_iters, cfg.warmup_iters, cfg.peak_lr);
            opt.step(params, lr);
            last_loss = batch_loss;
            log << "step " << step << " lr " << lr << " total " << batch_loss << " rgb "
                << sums.recon_rgb << " normal " << sums.recon_normal << " mask "
                << sums.recon_mask << " perceptual " << sums.perceptual << " depth " << sums.depth
                << " gradnorm " << norm << "\n";
            log.flush();
        }
        std::string ckpt = cfg.out_dir + "/ckpt_epoch_" + std::to_string(epoch + 1) + ".bin";
        nn::save_checkpoint(ckpt, params);
        result.final_checkpoint = ckpt;
    }
    if (cfg.epochs == 0) {
        result.final_checkpoint = cfg.out_dir + "/ckpt_epoch_0.bin";
        nn::save_checkpoint(result.final_checkpoint, params);
    }
    result.final_loss = last_loss;
    result.total_steps = step;
    return result;
}

}  // namespace trirec::train
