#include "trirec/model.hpp"

#include <cmath>
#include <stdexcept>

namespace trirec::model {

using namespace nn;

void ModelConfig::validate() const {
    if (patch_size <= 0 || input_res % patch_size != 0)
        throw std::invalid_argument("ModelConfig: patch_size must divide input_res");
    if (plane_res % patch_size != 0)
        throw std::invalid_argument("ModelConfig: patch_size must divide plane_res");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("ModelConfig: n_heads must divide d_model");
    if (beta_init <= 0) throw std::invalid_argument("ModelConfig: beta_init must be positive");
}

std::vector<Tensor> Params::all() const {
    std::vector<Tensor> out = {img_embed_w, img_embed_b, plk_embed_w, plk_embed_b,
                               mask_token,  tri_tokens};
    for (const auto& b : blocks) {
        out.insert(out.end(),
                   {b.ca_ln_g,  b.ca_ln_b,  b.ca_lnz_g, b.ca_lnz_b, b.ca_wq,    b.ca_bq,
                    b.ca_wk,    b.ca_bk,    b.ca_wv,    b.ca_bv,    b.ca_wo,    b.ca_bo,
                    b.mlp1_ln_g, b.mlp1_ln_b, b.mlp1_w1, b.mlp1_b1,  b.mlp1_w2,  b.mlp1_b2,
                    b.sa_ln_g,  b.sa_ln_b,  b.sa_wq,    b.sa_bq,    b.sa_wk,    b.sa_bk,
                    b.sa_wv,    b.sa_bv,    b.sa_wo,    b.sa_bo,    b.mlp2_ln_g, b.mlp2_ln_b,
                    b.mlp2_w1,  b.mlp2_b1,  b.mlp2_w2,  b.mlp2_b2});
    }
    out.insert(out.end(), {final_ln_g, final_ln_b, up_w, up_b, sdf_w0, sdf_b0, sdf_w1, sdf_b1,
                           sdf_w2, sdf_b2, rgb_w0, rgb_b0, rgb_w1, rgb_b1, rgb_w2, rgb_b2,
                           beta_raw});
    return out;
}

static Tensor make_param(nn::Rng& rng, const std::string& name, const Shape& shape, bool zero) {
    int64_t n = numel(shape);
    return param(name, shape, zero ? std::vector<Scalar>(n, 0.0) : trunc_normal(rng, n));
}

static Tensor ones_param(const std::string& name, const Shape& shape) {
    return param(name, shape, std::vector<Scalar>(numel(shape), 1.0));
}

void Model::init(nn::Rng& rng) {
    cfg.validate();
    int d = cfg.d_model;
    int ps = cfg.patch_size;
    int c = cfg.plane_channels;
    int h = cfg.decode_hidden;
    int hidden = cfg.mlp_ratio * d;

    p.img_embed_w = make_param(rng, "img_embed_w", {ps * ps * 3, d}, false);
    p.img_embed_b = make_param(rng, "img_embed_b", {1, d}, true);
    p.plk_embed_w = make_param(rng, "plk_embed_w", {ps * ps * 6, d}, false);
    p.plk_embed_b = make_param(rng, "plk_embed_b", {1, d}, true);
    p.mask_token = make_param(rng, "mask_token", {1, d}, false);
    p.tri_tokens = make_param(rng, "tri_tokens", {3 * cfg.tokens_per_plane(), d}, false);

    p.blocks.resize(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& b = p.blocks[l];
        std::string pre = "blk" + std::to_string(l) + ".";
        b.ca_ln_g = ones_param(pre + "ca_ln_g", {1, d});
        b.ca_ln_b = make_param(rng, pre + "ca_ln_b", {1, d}, true);
        b.ca_lnz_g = ones_param(pre + "ca_lnz_g", {1, d});
        b.ca_lnz_b = make_param(rng, pre + "ca_lnz_b", {1, d}, true);
        b.ca_wq = make_param(rng, pre + "ca_wq", {d, d}, false);
        b.ca_bq = make_param(rng, pre + "ca_bq", {1, d}, true);
        b.ca_wk = make_param(rng, pre + "ca_wk", {d, d}, false);
        b.ca_bk = make_param(rng, pre + "ca_bk", {1, d}, true);
        b.ca_wv = make_param(rng, pre + "ca_wv", {d, d}, false);
        b.ca_bv = make_param(rng, pre + "ca_bv", {1, d}, true);
        b.ca_wo = make_param(rng, pre + "ca_wo", {d, d}, true);  // zero: residual identity at init
        b.ca_bo = make_param(rng, pre + "ca_bo", {1, d}, true);
        b.mlp1_ln_g = ones_param(pre + "mlp1_ln_g", {1, d});
        b.mlp1_ln_b = make_param(rng, pre + "mlp1_ln_b", {1, d}, true);
        b.mlp1_w1 = make_param(rng, pre + "mlp1_w1", {d, hidden}, false);
        b.mlp1_b1 = make_param(rng, pre + "mlp1_b1", {1, hidden}, true);
        b.mlp1_w2 = make_param(rng, pre + "mlp1_w2", {hidden, d}, true);
        b.mlp1_b2 = make_param(rng, pre + "mlp1_b2", {1, d}, true);
        b.sa_ln_g = ones_param(pre + "sa_ln_g", {1, d});
        b.sa_ln_b = make_param(rng, pre + "sa_ln_b", {1, d}, true);
        b.sa_wq = make_param(rng, pre + "sa_wq", {d, d}, false);
        b.sa_bq = make_param(rng, pre + "sa_bq", {1, d}, true);
        b.sa_wk = make_param(rng, pre + "sa_wk", {d, d}, false);
        b.sa_bk = make_param(rng, pre + "sa_bk", {1, d}, true);
        b.sa_wv = make_param(rng, pre + "sa_wv", {d, d}, false);
        b.sa_bv = make_param(rng, pre + "sa_bv", {1, d}, true);
        b.sa_wo = make_param(rng, pre + "sa_wo", {d, d}, true);
        b.sa_bo = make_param(rng, pre + "sa_bo", {1, d}, true);
        b.mlp2_ln_g = ones_param(pre + "mlp2_ln_g", {1, d});
        b.mlp2_ln_b = make_param(rng, pre + "mlp2_ln_b", {1, d}, true);
        b.mlp2_w1 = make_param(rng, pre + "mlp2_w1", {d, hidden}, false);
        b.mlp2_b1 = make_param(rng, pre + "mlp2_b1", {1, hidden}, true);
        b.mlp2_w2 = make_param(rng, pre + "mlp2_w2", {hidden, d}, true);
        b.mlp2_b2 = make_param(rng, pre + "mlp2_b2", {1, d}, true);
    }

    p.final_ln_g = ones_param("final_ln_g", {1, d});
    p.final_ln_b = make_param(rng, "final_ln_b", {1, d}, true);
    p.up_w = make_param(rng, "up_w", {d, ps * ps * c}, false);
    p.up_b = make_param(rng, "up_b", {1, ps * ps * c}, true);

    p.sdf_w0 = make_param(rng, "sdf_w0", {3 * c, h}, false);
    p.sdf_b0 = make_param(rng, "sdf_b0", {1, h}, true);
    p.sdf_w1 = make_param(rng, "sdf_w1", {h, h}, false);
    p.sdf_b1 = make_param(rng, "sdf_b1", {1, h}, true);
    p.sdf_w2 = make_param(rng, "sdf_w2", {h, 1}, false);
    p.sdf_b2 = param("sdf_b2", {1, 1}, {cfg.sdf_bias_init});
    p.rgb_w0 = make_param(rng, "rgb_w0", {3 * c, h}, false);
    p.rgb_b0 = make_param(rng, "rgb_b0", {1, h}, true);
    p.rgb_w1 = make_param(rng, "rgb_w1", {h, h}, false);
    p.rgb_b1 = make_param(rng, "rgb_b1", {1, h}, true);
    p.rgb_w2 = make_param(rng, "rgb_w2", {h, 3}, false);
    p.rgb_b2 = make_param(rng, "rgb_b2", {1, 3}, true);

    p.beta_raw = param("beta_raw", {1, 1}, {std::log(std::expm1(cfg.beta_init))});
}

Tensor Model::beta() const { return softplus(p.beta_raw); }

NoGradGuard::NoGradGuard(const Model& m) : params(m.parameters()) {
    for (auto& t : params) t->requires_grad = false;
}

NoGradGuard::~NoGradGuard() {
    for (auto& t : params) t->requires_grad = true;
}

static Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), expand_rows(b, x->dim(0)));
}

static Tensor affine_ln(const Tensor& x, const Tensor& g, const Tensor& b) {
    int64_t n = x->dim(0);
    return add(mul(layer_norm_rows(x), expand_rows(g, n)), expand_rows(b, n));
}

Tensor patch_embed(const std::vector<double>& grid, int height, int width, int channels,
                   int patch_size, const Tensor& weight, const Tensor& bias) {
    if (height % patch_size != 0 || width % patch_size != 0)
        throw std::invalid_argument("patch_embed: patch size must divide resolution");
    if (grid.size() != static_cast<size_t>(height) * width * channels)
        throw std::invalid_argument("patch_embed: grid length mismatch");
    if (weight->dim(0) != static_cast<int64_t>(patch_size) * patch_size * channels)
        throw std::invalid_argument("patch_embed: projection rows must equal patch^2*channels");
    int pr = height / patch_size, pc = width / patch_size;
    int64_t n_tokens = static_cast<int64_t>(pr) * pc;
    int64_t flat = static_cast<int64_t>(patch_size) * patch_size * channels;
    std::vector<Scalar> patches(n_tokens * flat);
    for (int ty = 0; ty < pr; ++ty)
        for (int tx = 0; tx < pc; ++tx) {
            Scalar* dst = &patches[(static_cast<int64_t>(ty) * pc + tx) * flat];
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px)
                    for (int ch = 0; ch < channels; ++ch)
                        *dst++ = grid[((static_cast<size_t>(ty * patch_size + py) * width) +
                                       tx * patch_size + px) * channels + ch];
        }
    Tensor pt = constant({n_tokens, flat}, std::move(patches));
    return linear(pt, weight, bias);
}

std::vector<double> plucker_grid(const geom::Camera& cam) {
    geom::RayGrid rays = geom::plucker_rays(cam);
    std::vector<double> grid(static_cast<size_t>(cam.height) * cam.width * 6);
    for (size_t i = 0; i < rays.directions.size(); ++i) {
        grid[i * 6 + 0] = rays.directions[i].x;
        grid[i * 6 + 1] = rays.directions[i].y;
        grid[i * 6 + 2] = rays.directions[i].z;
        grid[i * 6 + 3] = rays.moments[i].x;
        grid[i * 6 + 4] = rays.moments[i].y;
        grid[i * 6 + 5] = rays.moments[i].z;
    }
    return grid;
}

std::vector<double> rgb_grid(const std::vector<Vec3>& rgb) {
    std::vector<double> grid(rgb.size() * 3);
    for (size_t i = 0; i < rgb.size(); ++i) {
        grid[i * 3 + 0] = rgb[i].x;
        grid[i * 3 + 1] = rgb[i].y;
        grid[i * 3 + 2] = rgb[i].z;
    }
    return grid;
}

Tensor apply_mask_tokens(const Tensor& tokens, const mask::PatchMask& m, const Tensor& mask_token) {
    if (m.flags.empty()) return tokens;
    int64_t n = tokens->dim(0), d = tokens->dim(1);
    if (static_cast<int64_t>(m.flags.size()) != n)
        throw std::invalid_argument("apply_mask_tokens: mask length != token count");
    std::vector<Scalar> keep(n), drop(n);
    for (int64_t i = 0; i < n; ++i) {
        drop[i] = m.flags[i] ? 1.0 : 0.0;
        keep[i] = 1.0 - drop[i];
    }
    Tensor keep_col = expand_cols(constant({n, 1}, std::move(keep)), d);
    Tensor drop_col = expand_cols(constant({n, 1}, std::move(drop)), d);
    return add(mul(tokens, keep_col), mul(expand_rows(mask_token, n), drop_col));
}

std::pair<Tensor, Tensor> assemble_inputs(const std::vector<Tensor>& view_image_tokens,
                                          const std::vector<Tensor>& view_plucker_tokens,
                                          const Tensor& cond_image_tokens,
                                          const Tensor& cond_plucker_tokens) {
    if (view_image_tokens.size() != view_plucker_tokens.size() || view_image_tokens.empty())
        throw std::invalid_argument("assemble_inputs: view token list mismatch");
    std::vector<Tensor> per_view;
    for (size_t i = 0; i < view_image_tokens.size(); ++i) {
        if (view_image_tokens[i]->shape != view_plucker_tokens[i]->shape)
            throw std::invalid_argument("assemble_inputs: image/plucker token count mismatch");
        per_view.push_back(add(view_image_tokens[i], view_plucker_tokens[i]));
    }
    Tensor x = per_view.size() == 1 ? per_view[0] : concat_rows(per_view);
    Tensor z = add(cond_image_tokens, cond_plucker_tokens);
    return {x, z};
}

std::pair<Tensor, Tensor> transformer_forward(const Model& m, const Tensor& x, const Tensor& z) {
    if (x->dim(1) != m.cfg.d_model || z->dim(1) != m.cfg.d_model)
        throw std::invalid_argument("transformer_forward: width mismatch");
    int64_t n_x = x->dim(0);
    int64_t n_tri = m.p.tri_tokens->dim(0);
    Tensor h = concat_rows({x, m.p.tri_tokens});
    int heads = m.cfg.n_heads;
    for (const auto& b : m.p.blocks) {
        {
            Tensor hn = affine_ln(h, b.ca_ln_g, b.ca_ln_b);
            Tensor zn = affine_ln(z, b.ca_lnz_g, b.ca_lnz_b);
            Tensor att = scaled_dot_product_attention(linear(hn, b.ca_wq, b.ca_bq),
                                                      linear(zn, b.ca_wk, b.ca_bk),
                                                      linear(zn, b.ca_wv, b.ca_bv), heads);
            h = add(h, linear(att, b.ca_wo, b.ca_bo));
        }
        {
            Tensor hn = affine_ln(h, b.mlp1_ln_g, b.mlp1_ln_b);
            h = add(h, linear(gelu(linear(hn, b.mlp1_w1, b.mlp1_b1)), b.mlp1_w2, b.mlp1_b2));
        }
        {
            Tensor hn = affine_ln(h, b.sa_ln_g, b.sa_ln_b);
            Tensor att = scaled_dot_product_attention(linear(hn, b.sa_wq, b.sa_bq),
                                                      linear(hn, b.sa_wk, b.sa_bk),
                                                      linear(hn, b.sa_wv, b.sa_bv), heads);
            h = add(h, linear(att, b.sa_wo, b.sa_bo));
        }
        {
            Tensor hn = affine_ln(h, b.mlp2_ln_g, b.mlp2_ln_b);
            h = add(h, linear(gelu(linear(hn, b.mlp2_w1, b.mlp2_b1)), b.mlp2_w2, b.mlp2_b2));
        }
    }
    return {slice_rows(h, 0, n_x), slice_rows(h, n_x, n_x + n_tri)};
}

Triplane upsample_triplanes(const Model& m, const Tensor& t_hat) {
    const auto& cfg = m.cfg;
    int tps = cfg.plane_tokens_side();
    int tpp = cfg.tokens_per_plane();
    if (t_hat->dim(0) != 3 * tpp || t_hat->dim(1) != cfg.d_model)
        throw std::invalid_argument("upsample_triplanes: token layout mismatch");
    int ps = cfg.patch_size, P = cfg.plane_res, c = cfg.plane_channels;
    Tensor up = linear(affine_ln(t_hat, m.p.final_ln_g, m.p.final_ln_b), m.p.up_w, m.p.up_b);

    // Token (tr,tc) pixel (pr,pc) channel ch -> plane position (tr*ps+pr, tc*ps+pc, ch).
    std::vector<int64_t> idx(static_cast<int64_t>(P) * P * c);
    for (int vr = 0; vr < P; ++vr)
        for (int uc = 0; uc < P; ++uc)
            for (int ch = 0; ch < c; ++ch) {
                int tr = vr / ps, pr = vr % ps;
                int tc = uc / ps, pc = uc % ps;
                int64_t token = static_cast<int64_t>(tr) * tps + tc;
                int64_t within = (static_cast<int64_t>(pr) * ps + pc) * c + ch;
                idx[(static_cast<int64_t>(vr) * P + uc) * c + ch] =
                    token * (static_cast<int64_t>(ps) * ps * c) + within;
            }

    Triplane out;
    out.res = P;
    out.channels = c;
    Tensor planes[3];
    for (int k = 0; k < 3; ++k) {
        Tensor tok = slice_rows(up, static_cast<int64_t>(k) * tpp, static_cast<int64_t>(k + 1) * tpp);
        planes[k] = gather(reshape(tok, {static_cast<int64_t>(tpp) * ps * ps * c}), idx,
                           {static_cast<int64_t>(P) * P, c});
    }
    out.xy = planes[0];
    out.yz = planes[1];
    out.xz = planes[2];
    return out;
}

Tensor sample_triplane(const Triplane& planes, const std::vector<double>& points) {
    int P = planes.res, c = planes.channels;
    int64_t n = static_cast<int64_t>(points.size() / 3);
    if (points.size() != static_cast<size_t>(n) * 3)
        throw std::invalid_argument("sample_triplane: points must be n x 3");
    const Tensor plane_t[3] = {planes.xy, planes.yz, planes.xz};

    struct Tap {
        int64_t i00, i01, i10, i11;
        double w00, w01, w10, w11;
    };
    // Precompute bilinear taps per point per plane.
    auto taps = std::make_shared<std::vector<Tap>>(static_cast<size_t>(n) * 3);
    auto coord = [&](double w) {
        double cl = std::clamp(w, -1.0, 1.0);
        return (cl + 1.0) * 0.5 * (P - 1);
    };
    for (int64_t i = 0; i < n; ++i) {
        double x = points[i * 3 + 0], y = points[i * 3 + 1], z = points[i * 3 + 2];
        double uv[3][2] = {{x, y}, {y, z}, {x, z}};  // (u, v) per plane
        for (int k = 0; k < 3; ++k) {
            double fu = coord(uv[k][0]), fv = coord(uv[k][1]);
            int iu = std::min(static_cast<int>(fu), P - 2);
            int iv = std::min(static_cast<int>(fv), P - 2);
            double du = fu - iu, dv = fv - iv;
            Tap& t = (*taps)[i * 3 + k];
            t.i00 = (static_cast<int64_t>(iv) * P + iu) * c;
            t.i01 = (static_cast<int64_t>(iv) * P + iu + 1) * c;
            t.i10 = (static_cast<int64_t>(iv + 1) * P + iu) * c;
            t.i11 = (static_cast<int64_t>(iv + 1) * P + iu + 1) * c;
            t.w00 = (1 - du) * (1 - dv);
            t.w01 = du * (1 - dv);
            t.w10 = (1 - du) * dv;
            t.w11 = du * dv;
        }
    }

    std::vector<Scalar> out(static_cast<size_t>(n) * 3 * c);
    for (int64_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            const Tap& t = (*taps)[i * 3 + k];
            const auto& pv = plane_t[k]->value;
            Scalar* dst = &out[(i * 3 + k) * c];
            for (int ch = 0; ch < c; ++ch)
                dst[ch] = t.w00 * pv[t.i00 + ch] + t.w01 * pv[t.i01 + ch] +
                          t.w10 * pv[t.i10 + ch] + t.w11 * pv[t.i11 + ch];
        }

    Tensor xy = planes.xy, yz = planes.yz, xz = planes.xz;
    return make_op({n, 3 * c}, std::move(out), {xy, yz, xz},
                   [xy, yz, xz, taps, n, c](Node& self) {
                       Node* pl[3] = {xy.get(), yz.get(), xz.get()};
                       for (int k = 0; k < 3; ++k)
                           if (pl[k]->requires_grad) pl[k]->ensure_grad();
                       for (int64_t i = 0; i < n; ++i)
                           for (int k = 0; k < 3; ++k) {
                               if (!pl[k]->requires_grad) continue;
                               const Tap& t = (*taps)[i * 3 + k];
                               auto& pg = pl[k]->grad;
                               const Scalar* g = &self.grad[(i * 3 + k) * c];
                               for (int ch = 0; ch < c; ++ch) {
                                   pg[t.i00 + ch] += t.w00 * g[ch];
                                   pg[t.i01 + ch] += t.w01 * g[ch];
                                   pg[t.i10 + ch] += t.w10 * g[ch];
                                   pg[t.i11 + ch] += t.w11 * g[ch];
                               }
                           }
                   });
}

Tensor decode_sdf(const Model& m, const Tensor& latent) {
    Tensor h0 = gelu(linear(latent, m.p.sdf_w0, m.p.sdf_b0));
    Tensor h1 = gelu(linear(h0, m.p.sdf_w1, m.p.sdf_b1));
    return linear(h1, m.p.sdf_w2, m.p.sdf_b2);
}

Tensor decode_rgb(const Model& m, const Tensor& latent) {
    Tensor h0 = gelu(linear(latent, m.p.rgb_w0, m.p.rgb_b0));
    Tensor h1 = gelu(linear(h0, m.p.rgb_w1, m.p.rgb_b1));
    return sigmoid(linear(h1, m.p.rgb_w2, m.p.rgb_b2));
}

Triplane forward_to_triplane(const Model& m, const std::vector<ViewInput>& views,
                             const ViewInput& cond, bool corrupt_cond) {
    const auto& cfg = m.cfg;
    std::vector<Tensor> img_tokens, plk_tokens;
    for (const auto& v : views) {
        Tensor ti = patch_embed(v.image, v.camera.height, v.camera.width, 3, cfg.patch_size,
                                m.p.img_embed_w, m.p.img_embed_b);
        ti = apply_mask_tokens(ti, v.mask, m.p.mask_token);
        img_tokens.push_back(ti);
        plk_tokens.push_back(patch_embed(plucker_grid(v.camera), v.camera.height, v.camera.width,
                                         6, cfg.patch_size, m.p.plk_embed_w, m.p.plk_embed_b));
    }
    Tensor cond_img = patch_embed(cond.image, cond.camera.height, cond.camera.width, 3,
                                  cfg.patch_size, m.p.img_embed_w, m.p.img_embed_b);
    if (corrupt_cond) {
        mask::PatchMask full;
        full.rows = cond.camera.height / cfg.patch_size;
        full.cols = cond.camera.width / cfg.patch_size;
        full.patch_size = cfg.patch_size;
        full.flags.assign(static_cast<size_t>(full.rows) * full.cols, 1);
        cond_img = apply_mask_tokens(cond_img, full, m.p.mask_token);
    }
    Tensor cond_plk = patch_embed(plucker_grid(cond.camera), cond.camera.height, cond.camera.width,
                                  6, cfg.patch_size, m.p.plk_embed_w, m.p.plk_embed_b);
    auto [x, z] = assemble_inputs(img_tokens, plk_tokens, cond_img, cond_plk);
    auto [x_hat, t_hat] = transformer_forward(m, x, z);
    (void)x_hat;  // predicted image tokens are unsupervised and discarded
    return upsample_triplanes(m, t_hat);
}

}  // namespace trirec::model
