#include "trirec/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace trirec::losses {

using namespace nn;

GTCrop make_gt_crop(const scene::SceneSDF& sc, const geom::Camera& cam, int row0, int col0,
                    int height, int width) {
    if (row0 < 0 || col0 < 0 || row0 + height > cam.height || col0 + width > cam.width)
        throw std::invalid_argument("make_gt_crop: crop out of bounds");
    GTCrop crop;
    crop.height = height;
    crop.width = width;
    size_t n = static_cast<size_t>(height) * width;
    crop.rgb.assign(n * 3, 1.0);
    crop.normal.assign(n * 3, 0.0);
    crop.sil.assign(n, 0.0);
    crop.depth.assign(n, 0.0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            Vec3 o, d;
            geom::pixel_ray(cam, row0 + r, col0 + c, o, d);
            double t = scene::trace_ray(sc, o, d);
            size_t i = static_cast<size_t>(r) * width + c;
            Vec3 rgb = scene::shade_pixel_aa(sc, cam, row0 + r, col0 + c);
            crop.rgb[i * 3] = rgb.x;
            crop.rgb[i * 3 + 1] = rgb.y;
            crop.rgb[i * 3 + 2] = rgb.z;
            if (!std::isfinite(t)) continue;
            Vec3 p = o + t * d;
            Vec3 nrm = scene::sdf_normal(sc, p);
            crop.normal[i * 3] = nrm.x;
            crop.normal[i * 3 + 1] = nrm.y;
            crop.normal[i * 3 + 2] = nrm.z;
            crop.sil[i] = 1.0;
            crop.depth[i] = t;
        }
    return crop;
}

// Block-average pooling of an (h*w, ch) tensor by integer factor.
static Tensor avg_pool(const Tensor& a, int h, int w, int ch, int f) {
    if (f == 1) return a;
    int oh = h / f, ow = w / f;
    if (oh == 0 || ow == 0) throw std::invalid_argument("avg_pool: image too small");
    int64_t n_out = static_cast<int64_t>(oh) * ow;
    std::vector<Scalar> out(n_out * ch, 0.0);
    double inv = 1.0 / (f * f);
    for (int r = 0; r < oh * f; ++r)
        for (int c = 0; c < ow * f; ++c) {
            int64_t src = (static_cast<int64_t>(r) * w + c) * ch;
            int64_t dst = (static_cast<int64_t>(r / f) * ow + c / f) * ch;
            for (int k = 0; k < ch; ++k) out[dst + k] += a->value[src + k] * inv;
        }
    int64_t wi = w;
    return make_op({n_out, ch}, std::move(out), {a}, [a, oh, ow, ch, f, wi, inv](Node& self) {
        a->ensure_grad();
        for (int r = 0; r < oh * f; ++r)
            for (int c = 0; c < ow * f; ++c) {
                int64_t src = (static_cast<int64_t>(r) * wi + c) * ch;
                int64_t dst = (static_cast<int64_t>(r / f) * ow + c / f) * ch;
                for (int k = 0; k < ch; ++k) a->grad[src + k] += self.grad[dst + k] * inv;
            }
    });
}

static std::vector<double> pool_host(const std::vector<double>& a, int h, int w, int ch, int f) {
    if (f == 1) return a;
    int oh = h / f, ow = w / f;
    std::vector<double> out(static_cast<size_t>(oh) * ow * ch, 0.0);
    double inv = 1.0 / (f * f);
    for (int r = 0; r < oh * f; ++r)
        for (int c = 0; c < ow * f; ++c)
            for (int k = 0; k < ch; ++k)
                out[(static_cast<size_t>(r / f) * ow + c / f) * ch + k] +=
                    a[(static_cast<size_t>(r) * w + c) * ch + k] * inv;
    return out;
}

Tensor perceptual_loss(const Tensor& pred_rgb, const GTCrop& gt) {
    if (gt.height < 8 || gt.width < 8)
        throw std::invalid_argument("perceptual_loss: crop must be at least 8x8");
    if (pred_rgb->n() != static_cast<int64_t>(gt.rgb.size()))
        throw std::invalid_argument("perceptual_loss: shape mismatch");
    Tensor acc;
    for (int f : {1, 2, 4}) {
        Tensor p = avg_pool(pred_rgb, gt.height, gt.width, 3, f);
        std::vector<double> g = pool_host(gt.rgb, gt.height, gt.width, 3, f);
        Tensor diff = sub(p, constant(p->shape, std::move(g)));
        Tensor level = mean_all(square(diff));
        acc = acc ? add(acc, level) : level;
    }
    return mul_scalar(acc, 1.0 / 3.0);
}

Tensor depth_loss(const Tensor& pred_depth, const GTCrop& gt) {
    int64_t n = static_cast<int64_t>(gt.sil.size());
    if (pred_depth->n() != n) throw std::invalid_argument("depth_loss: shape mismatch");
    double count = 0;
    for (double s : gt.sil) count += s;
    if (count == 0) return constant_scalar(0.0);
    Tensor diff = sub(pred_depth, constant({n, 1}, gt.depth));
    Tensor masked = mul(diff, constant({n, 1}, gt.sil));
    return mul_scalar(sum_all(square(masked)), 1.0 / count);
}

LossReport recon_loss(const volren::PredView& pred, const GTCrop& gt, const LossWeights& w) {
    int64_t n = static_cast<int64_t>(gt.sil.size());
    if (pred.rgb->dim(0) != n)
        throw std::invalid_argument("recon_loss: prediction/gt dimension mismatch");

    LossReport rep;
    Tensor total = constant_scalar(0.0);

    Tensor rgb_term = mean_all(square(sub(pred.rgb, constant({n, 3}, gt.rgb))));
    rep.recon_rgb = rgb_term->value[0];
    if (w.w_image != 0) total = add(total, mul_scalar(rgb_term, w.w_image));

    Tensor mask_term = mean_all(square(sub(pred.opacity, constant({n, 1}, gt.sil))));
    rep.recon_mask = mask_term->value[0];
    if (w.w_mask != 0) total = add(total, mul_scalar(mask_term, w.w_mask));

    if (w.w_normal != 0 && pred.has_normals) {
        double count = 0;
        for (double s : gt.sil) count += s;
        if (count > 0) {
            Tensor sil3 = expand_cols(constant({n, 1}, gt.sil), 3);
            Tensor diff = mul(sub(pred.normal, constant({n, 3}, gt.normal)), sil3);
            Tensor term = mul_scalar(sum_all(square(diff)), 1.0 / (3.0 * count));
            rep.recon_normal = term->value[0];
            total = add(total, mul_scalar(term, w.w_normal));
        }
    }

    if (w.w_perceptual != 0) {
        Tensor p = perceptual_loss(pred.rgb, gt);
        rep.perceptual = p->value[0];
        total = add(total, mul_scalar(p, w.w_perceptual));
    }

    if (w.w_depth != 0) {
        Tensor d = depth_loss(pred.depth, gt);
        rep.depth = d->value[0];
        total = add(total, mul_scalar(d, w.w_depth));
    }

    rep.total = total;
    rep.total_value = total->value[0];
    return rep;
}

}  // namespace trirec::losses
