#include "trirec/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trirec/losses.hpp"
#include "trirec/model.hpp"
#include "trirec/scene.hpp"
#include "trirec/volren.hpp"

namespace trirec::nn {

namespace {

Tensor randt(Rng& rng, const Shape& shape, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<Scalar> data(static_cast<size_t>(numel(shape)));
    for (Scalar& v : data) v = dist(rng);
    return constant(shape, std::move(data));
}

// Well-conditioned scalar projection: mean(y * w) with fixed random weights.
std::function<Tensor(const Tensor&)> project(std::function<Tensor(const Tensor&)> op, Rng& rng) {
    // Weights drawn lazily on first call so they match the output shape, then
    // reused so every finite-difference evaluation sees the same projection.
    auto w = std::make_shared<Tensor>();
    auto seed = rng();
    return [op = std::move(op), w, seed](const Tensor& x) {
        Tensor y = op(x);
        if (!*w) {
            Rng wrng(seed);
            *w = randt(wrng, y->shape, 0.5, 1.5);
        }
        return mean_all(mul(y, *w));
    };
}

}  // namespace

std::vector<GradCheckResult> run_op_gradchecks(uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> out;
    auto run = [&](const std::string& name, const Tensor& x,
                   std::function<Tensor(const Tensor&)> op) {
        out.push_back({name, grad_check(project(std::move(op), rng), x)});
    };

    Shape s34{3, 4};
    Tensor a = randt(rng, s34, -1.0, 1.0);
    Tensor b = randt(rng, s34, 0.5, 1.5);  // positive, away from zero

    run("add.lhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return add(x, b); });
    run("add.rhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return add(a, x); });
    run("sub.lhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return sub(x, b); });
    run("sub.rhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return sub(a, x); });
    run("mul.lhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return mul(x, b); });
    run("mul.rhs", randt(rng, s34, -1, 1), [&](const Tensor& x) { return mul(a, x); });
    run("div.num", randt(rng, s34, -1, 1), [&](const Tensor& x) { return div(x, b); });
    run("div.den", randt(rng, s34, 0.5, 1.5), [&](const Tensor& x) { return div(a, x); });
    run("add_scalar", randt(rng, s34, -1, 1), [](const Tensor& x) { return add_scalar(x, 0.7); });
    run("mul_scalar", randt(rng, s34, -1, 1), [](const Tensor& x) { return mul_scalar(x, -1.3); });
    run("exp", randt(rng, s34, -1, 1), [](const Tensor& x) { return exp(x); });
    run("log", randt(rng, s34, 0.5, 2.0), [](const Tensor& x) { return log(x); });
    run("sqrt", randt(rng, s34, 0.5, 2.0), [](const Tensor& x) { return sqrt(x); });
    run("square", randt(rng, s34, -1, 1), [](const Tensor& x) { return square(x); });
    run("sigmoid", randt(rng, s34, -2, 2), [](const Tensor& x) { return sigmoid(x); });
    run("softplus", randt(rng, s34, -2, 2), [](const Tensor& x) { return softplus(x); });
    run("gelu", randt(rng, s34, -2, 2), [](const Tensor& x) { return gelu(x); });
    run("reshape", randt(rng, s34, -1, 1),
        [](const Tensor& x) { return reshape(x, Shape{4, 3}); });
    run("transpose2d", randt(rng, s34, -1, 1), [](const Tensor& x) { return transpose2d(x); });
    run("concat_rows", randt(rng, s34, -1, 1),
        [&](const Tensor& x) { return concat_rows({x, b}); });
    run("slice_rows", randt(rng, Shape{5, 3}, -1, 1),
        [](const Tensor& x) { return slice_rows(x, 1, 4); });
    run("expand_rows", randt(rng, Shape{1, 4}, -1, 1),
        [](const Tensor& x) { return expand_rows(x, 3); });
    run("expand_cols", randt(rng, Shape{3, 1}, -1, 1),
        [](const Tensor& x) { return expand_cols(x, 4); });
    {
        std::vector<int64_t> idx(12);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        run("gather", randt(rng, s34, -1, 1),
            [idx](const Tensor& x) { return gather(x, idx, Shape{4, 3}); });
    }
    // Inputs kept away from the clamp threshold (subgradient kink).
    run("clamp_min", randt(rng, s34, 0.2, 1.0), [](const Tensor& x) { return clamp_min(x, 0.1); });
    run("sum_all", randt(rng, s34, -1, 1), [](const Tensor& x) { return sum_all(x); });
    run("mean_all", randt(rng, s34, -1, 1), [](const Tensor& x) { return mean_all(x); });
    run("max_all", randt(rng, s34, -1, 1), [](const Tensor& x) { return max_all(x); });
    run("sum_axis.0", randt(rng, s34, -1, 1), [](const Tensor& x) { return sum_axis(x, 0); });
    run("sum_axis.1", randt(rng, s34, -1, 1), [](const Tensor& x) { return sum_axis(x, 1); });
    run("cumsum_exclusive.0", randt(rng, s34, -1, 1),
        [](const Tensor& x) { return cumsum_exclusive(x, 0); });
    run("cumsum_exclusive.1", randt(rng, s34, -1, 1),
        [](const Tensor& x) { return cumsum_exclusive(x, 1); });
    {
        Tensor m = randt(rng, Shape{4, 5}, -1, 1);
        run("matmul.lhs", randt(rng, s34, -1, 1),
            [m](const Tensor& x) { return matmul(x, m); });
        Tensor l = randt(rng, s34, -1, 1);
        run("matmul.rhs", randt(rng, Shape{4, 5}, -1, 1),
            [l](const Tensor& x) { return matmul(l, x); });
    }
    run("softmax_rows", randt(rng, s34, -1, 1),
        [](const Tensor& x) { return softmax_rows(x); });
    run("layer_norm_rows", randt(rng, s34, -1, 1),
        [](const Tensor& x) { return layer_norm_rows(x); });
    {
        Tensor q = randt(rng, s34, -1, 1);
        Tensor k = randt(rng, Shape{5, 4}, -1, 1);
        Tensor v = randt(rng, Shape{5, 4}, -1, 1);
        run("attention.q", randt(rng, s34, -1, 1),
            [k, v](const Tensor& x) { return scaled_dot_product_attention(x, k, v, 2); });
        run("attention.k", randt(rng, Shape{5, 4}, -1, 1),
            [q, v](const Tensor& x) { return scaled_dot_product_attention(q, x, v, 2); });
        run("attention.v", randt(rng, Shape{5, 4}, -1, 1),
            [q, k](const Tensor& x) { return scaled_dot_product_attention(q, k, x, 2); });
    }
    {
        Tensor beta = constant(Shape{1, 1}, {0.1});
        run("sdf_to_density.s", randt(rng, Shape{6, 1}, -0.4, 0.4),
            [beta](const Tensor& x) { return volren::sdf_to_density(x, beta); });
        Tensor s = randt(rng, Shape{6, 1}, -0.4, 0.4);
        run("sdf_to_density.beta", constant(Shape{1, 1}, {0.12}),
            [s](const Tensor& x) { return volren::sdf_to_density(s, x); });
    }
    {
        int res = 4, ch = 2;
        Shape plane{static_cast<int64_t>(res) * res, ch};
        Tensor yz = randt(rng, plane, -1, 1);
        Tensor xz = randt(rng, plane, -1, 1);
        // Points placed inside cells, away from grid lines and the clamp edge.
        std::vector<double> pts{0.21, -0.37, 0.11, -0.55, 0.42, 0.3, 0.05, -0.2, -0.61};
        run("sample_triplane", randt(rng, plane, -1, 1), [=](const Tensor& x) {
            model::Triplane t;
            t.xy = x;
            t.yz = yz;
            t.xz = xz;
            t.res = res;
            t.channels = ch;
            return model::sample_triplane(t, pts);
        });
    }
    {
        int hw = 8;
        losses::GTCrop gt;
        gt.height = hw;
        gt.width = hw;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        gt.rgb.resize(static_cast<size_t>(hw) * hw * 3);
        for (double& v : gt.rgb) v = u(rng);
        out.push_back({"perceptual_loss",
                       grad_check(
                           [gt](const Tensor& x) { return losses::perceptual_loss(x, gt); },
                           randt(rng, Shape{static_cast<int64_t>(hw) * hw, 3}, 0.0, 1.0))});
        losses::GTCrop dg;
        dg.height = hw;
        dg.width = hw;
        dg.sil.assign(static_cast<size_t>(hw) * hw, 0.0);
        dg.depth.assign(static_cast<size_t>(hw) * hw, 0.0);
        for (size_t i = 0; i < dg.sil.size(); i += 3) {
            dg.sil[i] = 1.0;
            dg.depth[i] = 1.0 + u(rng);
        }
        out.push_back({"depth_loss",
                       grad_check(
                           [dg](const Tensor& x) { return losses::depth_loss(x, dg); },
                           randt(rng, Shape{static_cast<int64_t>(hw) * hw, 1}, 1.0, 2.0))});
    }
    return out;
}

std::vector<GradCheckResult> run_end_to_end_gradchecks(uint64_t seed) {
    Rng rng(seed);
    model::Model m;
    m.cfg.patch_size = 4;
    m.cfg.input_res = 8;
    m.cfg.d_model = 8;
    m.cfg.n_heads = 2;
    m.cfg.n_layers = 1;
    m.cfg.plane_res = 4;
    m.cfg.plane_channels = 4;
    m.cfg.decode_hidden = 8;
    m.cfg.mlp_ratio = 2;
    m.cfg.validate();
    m.init(rng);
    // The residual-identity init zeroes the block output projections, which
    // would make the loss exactly independent of the input branch and the
    // check vacuous. Re-draw every parameter so gradients actually flow.
    std::uniform_real_distribution<double> pdist(-0.25, 0.25);
    for (const Tensor& p : m.parameters())
        if (p != m.p.beta_raw)
            for (Scalar& v : p->value) v = pdist(rng);

    scene::SceneSDF sc;
    scene::PrimitiveSDF sphere;
    sphere.kind = scene::PrimitiveKind::Sphere;
    sphere.params = {0.5, 0.0, 0.0};
    sc.primitives.push_back(sphere);

    geom::Camera cam_in = geom::look_at_camera(Vec3(0, 0.3, 2.1), Vec3(0, 0, 0), 0.6, 8, 8);
    geom::Camera cam_cond = geom::look_at_camera(Vec3(1.9, 0.2, 0.8), Vec3(0, 0, 0), 0.6, 8, 8);
    geom::Camera cam_sup = geom::look_at_camera(Vec3(-1.5, -0.4, 1.4), Vec3(0, 0, 0), 0.6, 8, 8);

    model::ViewInput in;
    in.image = model::rgb_grid(scene::render_ground_truth(sc, cam_in).rgb);
    in.camera = cam_in;
    in.mask.rows = 2;
    in.mask.cols = 2;
    in.mask.patch_size = 4;
    in.mask.flags = {1, 0, 0, 0};  // one masked patch: the mask token is live
    model::ViewInput cond;
    cond.image = model::rgb_grid(scene::render_ground_truth(sc, cam_cond).rgb);
    cond.camera = cam_cond;

    losses::GTCrop gt = losses::make_gt_crop(sc, cam_sup, 2, 2, 4, 4);
    losses::LossWeights w;
    w.w_image = 1.0;
    w.w_normal = 1.0;
    w.w_mask = 1.0;
    w.w_perceptual = 0.0;  // crop below the pyramid's 8x8 minimum
    w.w_depth = 1.0;

    auto loss = [&](const Tensor&) {
        model::Triplane planes = model::forward_to_triplane(m, {in}, cond);
        volren::RenderOptions opt;
        opt.n_samples = 4;
        opt.mode = volren::SampleMode::Midpoint;  // deterministic for FD
        opt.with_normals = true;
        volren::CropRect crop{2, 2, 4, 4};
        volren::PredView pred = volren::render_view(m, planes, cam_sup, crop, opt);
        return losses::recon_loss(pred, gt, w).total;
    };

    // h = 1e-3: with the fourth-order stencil the truncation error is
    // negligible, and the larger step keeps cancellation noise in the deep
    // composite objective below the gradient magnitudes being checked.
    const double h = 1e-3;
    std::vector<GradCheckResult> out;
    out.push_back({"loss/mask_token", grad_check(loss, m.p.mask_token, h)});
    out.push_back({"loss/tri_tokens", grad_check(loss, m.p.tri_tokens, h)});
    out.push_back({"loss/img_embed_w", grad_check(loss, m.p.img_embed_w, h)});
    return out;
}

}  // namespace trirec::nn
