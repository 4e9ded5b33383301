#include "trirec/volren.hpp"

#include <cmath>
#include <stdexcept>

namespace trirec::volren {

using namespace nn;

Tensor sdf_to_density(const Tensor& s, const Tensor& beta) {
    if (beta->n() != 1) throw std::invalid_argument("sdf_to_density: beta must be scalar");
    double b = beta->value[0];
    if (b <= 0) throw std::invalid_argument("sdf_to_density: beta must be positive");
    std::vector<Scalar> out(s->value.size());
    for (size_t i = 0; i < out.size(); ++i) {
        double v = s->value[i];
        // alpha * Psi_beta(-v) with alpha = 1/beta
        out[i] = v >= 0 ? 0.5 / b * std::exp(-v / b) : (1.0 - 0.5 * std::exp(v / b)) / b;
    }
    return make_op(s->shape, std::move(out), {s, beta}, [s, beta, b](Node& self) {
        Scalar dbeta_acc = 0;
        bool need_s = s->requires_grad, need_b = beta->requires_grad;
        if (need_s) s->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i) {
            double v = s->value[i];
            double e = std::exp(-std::fabs(v) / b);
            if (need_s) s->grad[i] += self.grad[i] * (-e / (2 * b * b));
            if (need_b) {
                double db;
                if (v >= 0)
                    db = (e / (2 * b * b)) * (v / b - 1.0);
                else
                    db = -(1.0 - 0.5 * e) / (b * b) + (v / (2 * b * b * b)) * e;
                dbeta_acc += self.grad[i] * db;
            }
        }
        if (need_b) {
            beta->ensure_grad();
            beta->grad[0] += dbeta_acc;
        }
    });
}

// (n,1) columns -> (n,3) by stacking.
static Tensor stack_cols3(const Tensor& a, const Tensor& b, const Tensor& c) {
    return transpose2d(concat_rows({transpose2d(a), transpose2d(b), transpose2d(c)}));
}

PredView render_rays(const Model& m, const Triplane& planes, const std::vector<Vec3>& origins,
                     const std::vector<Vec3>& dirs, const RenderOptions& opt) {
    if (origins.size() != dirs.size()) throw std::invalid_argument("render_rays: ray list mismatch");
    int64_t R = static_cast<int64_t>(origins.size());
    int64_t S = opt.n_samples;
    if (S < 2) throw std::invalid_argument("render_rays: n_samples must be >= 2");
    if (opt.mode == SampleMode::StratifiedJitter && opt.rng == nullptr)
        throw std::invalid_argument("render_rays: stratified sampling requires an rng");

    std::vector<Scalar> ts(R * S), deltas(R * S), hit_flags(R * S);
    std::vector<double> pts(static_cast<size_t>(R) * S * 3);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int64_t r = 0; r < R; ++r) {
        double tn = 0, tf = 0;
        bool hit;
        if (opt.use_fixed_range) {
            if (!(opt.t_near < opt.t_far))
                throw std::invalid_argument("render_rays: degenerate sampling interval");
            tn = opt.t_near;
            tf = opt.t_far;
            hit = true;
        } else {
            hit = geom::ray_cube_near_far(origins[r], dirs[r], tn, tf);
            if (!hit) {
                tn = 0;
                tf = 1;
            }
        }
        double bin = (tf - tn) / static_cast<double>(S);
        for (int64_t i = 0; i < S; ++i) {
            double u = opt.mode == SampleMode::Midpoint ? 0.5 : u01(*opt.rng);
            double t = tn + (static_cast<double>(i) + u) * bin;
            ts[r * S + i] = t;
            hit_flags[r * S + i] = hit ? 1.0 : 0.0;
            Vec3 p = origins[r] + t * dirs[r];
            pts[(r * S + i) * 3 + 0] = p.x;
            pts[(r * S + i) * 3 + 1] = p.y;
            pts[(r * S + i) * 3 + 2] = p.z;
        }
        for (int64_t i = 0; i + 1 < S; ++i) deltas[r * S + i] = ts[r * S + i + 1] - ts[r * S + i];
        deltas[r * S + S - 1] = tf - ts[r * S + S - 1];
    }

    Tensor latent = model::sample_triplane(planes, pts);
    Tensor sdf = model::decode_sdf(m, latent);
    Tensor beta = m.beta();
    Tensor sigma = sdf_to_density(sdf, beta);
    sigma = mul(reshape(sigma, {R, S}), constant({R, S}, hit_flags));
    Tensor tau = mul(sigma, constant({R, S}, std::move(deltas)));
    Tensor trans = nn::exp(mul_scalar(cumsum_exclusive(tau, 1), -1.0));
    Tensor absorb = sub(full({R, S}, 1.0), nn::exp(mul_scalar(tau, -1.0)));
    Tensor w = mul(trans, absorb);  // (R,S)

    Tensor w_col = reshape(w, {R * S, 1});
    Tensor w3 = expand_cols(w_col, 3);

    Tensor color = model::decode_rgb(m, latent);
    Tensor rgb_acc = sum_axis(reshape(mul(color, w3), {R, S, 3}), 1);  // (R,3)
    Tensor opacity = reshape(sum_axis(w, 1), {R, 1});
    Tensor bg = expand_cols(add_scalar(mul_scalar(opacity, -1.0), 1.0), 3);
    Tensor rgb_out = add(rgb_acc, bg);  // white background

    Tensor ts_t = constant({R, S}, std::move(ts));
    Tensor depth = div(reshape(sum_axis(mul(w, ts_t), 1), {R, 1}), clamp_min(opacity, 1e-6));

    PredView out;
    out.rgb = rgb_out;
    out.opacity = opacity;
    out.depth = depth;

    if (opt.with_normals) {
        double h = opt.normal_step;
        Tensor g[3];
        for (int axis = 0; axis < 3; ++axis) {
            std::vector<double> pp = pts, pm = pts;
            for (int64_t i = 0; i < R * S; ++i) {
                pp[i * 3 + axis] += h;
                pm[i * 3 + axis] -= h;
            }
            Tensor sp = model::decode_sdf(m, model::sample_triplane(planes, pp));
            Tensor sm = model::decode_sdf(m, model::sample_triplane(planes, pm));
            g[axis] = mul_scalar(sub(sp, sm), 0.5 / h);
        }
        Tensor gv = stack_cols3(g[0], g[1], g[2]);  // (R*S,3)
        // The floor keeps the normalization well-conditioned where the
        // decoded field is nearly constant (|g| ~ 0).
        Tensor gnorm = nn::sqrt(add_scalar(sum_axis(square(gv), 1), 1e-12));
        Tensor denom = expand_cols(reshape(gnorm, {R * S, 1}), 3);
        Tensor n_unit = div(gv, denom);
        out.normal = sum_axis(reshape(mul(n_unit, w3), {R, S, 3}), 1);
        out.has_normals = true;
    } else {
        out.normal = zeros({R, 3});
    }
    return out;
}

PredView render_view(const Model& m, const Triplane& planes, const geom::Camera& cam,
                     const CropRect& crop, const RenderOptions& opt) {
    if (crop.row0 < 0 || crop.col0 < 0 || crop.height <= 0 || crop.width <= 0 ||
        crop.row0 + crop.height > cam.height || crop.col0 + crop.width > cam.width)
        throw std::invalid_argument("render_view: crop out of bounds");
    std::vector<Vec3> origins, dirs;
    origins.reserve(static_cast<size_t>(crop.height) * crop.width);
    dirs.reserve(origins.capacity());
    for (int r = 0; r < crop.height; ++r)
        for (int c = 0; c < crop.width; ++c) {
            Vec3 o, d;
            geom::pixel_ray(cam, crop.row0 + r, crop.col0 + c, o, d);
            origins.push_back(o);
            dirs.push_back(d);
        }
    PredView out = render_rays(m, planes, origins, dirs, opt);
    out.height = crop.height;
    out.width = crop.width;
    return out;
}

void render_ray(const Model& m, const Triplane& planes, const Vec3& origin, const Vec3& dir,
                int n_samples, double t_near, double t_far, Vec3& rgb_out, double& opacity_out) {
    if (!(t_near < t_far)) throw std::invalid_argument("render_ray: degenerate interval");
    RenderOptions opt;
    opt.n_samples = n_samples;
    opt.use_fixed_range = true;
    opt.t_near = t_near;
    opt.t_far = t_far;
    PredView pv = render_rays(m, planes, {origin}, {dir}, opt);
    rgb_out = {pv.rgb->value[0], pv.rgb->value[1], pv.rgb->value[2]};
    opacity_out = pv.opacity->value[0];
}

Vec3 estimate_normal(const Model& m, const Triplane& planes, const Vec3& p, double step) {
    Vec3 g;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 a = p, b = p;
        a[axis] += step;
        b[axis] -= step;
        std::vector<double> pts = {a.x, a.y, a.z, b.x, b.y, b.z};
        Tensor sdf = model::decode_sdf(m, model::sample_triplane(planes, pts));
        g[axis] = (sdf->value[0] - sdf->value[1]) / (2 * step);
    }
    double n = norm(g);
    return n > 1e-8 ? g / (n + 1e-8) : Vec3{0, 0, 0};
}

}  // namespace trirec::volren
