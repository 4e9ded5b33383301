#pragma once

#include <string>
#include <vector>

#include "trirec/geometry.hpp"
#include "trirec/masking.hpp"
#include "trirec/tensor.hpp"

namespace trirec::model {

using nn::Shape;
using nn::Tensor;

struct ModelConfig {
    int patch_size = 8;
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 4;
    int plane_res = 32;      // P, latent plane resolution
    int plane_channels = 16; // c
    int decode_hidden = 64;
    int mlp_ratio = 4;       // transformer MLP hidden = mlp_ratio * d_model
    int input_res = 64;
    double beta_init = 0.1;
    double sdf_bias_init = 0.5;

    int tokens_per_view() const {
        int s = input_res / patch_size;
        return s * s;
    }
    int plane_tokens_side() const { return plane_res / patch_size; }
    int tokens_per_plane() const { return plane_tokens_side() * plane_tokens_side(); }

    void validate() const;
};

// One transformer block: Pre-LN cross-attention to the conditional sequence,
// then self-attention, each followed by an MLP, all residual.
struct BlockParams {
    Tensor ca_ln_g, ca_ln_b, ca_lnz_g, ca_lnz_b;
    Tensor ca_wq, ca_bq, ca_wk, ca_bk, ca_wv, ca_bv, ca_wo, ca_bo;
    Tensor mlp1_ln_g, mlp1_ln_b, mlp1_w1, mlp1_b1, mlp1_w2, mlp1_b2;
    Tensor sa_ln_g, sa_ln_b;
    Tensor sa_wq, sa_bq, sa_wk, sa_bk, sa_wv, sa_bv, sa_wo, sa_bo;
    Tensor mlp2_ln_g, mlp2_ln_b, mlp2_w1, mlp2_b1, mlp2_w2, mlp2_b2;
};

struct Params {
    Tensor img_embed_w, img_embed_b;
    Tensor plk_embed_w, plk_embed_b;
    Tensor mask_token;
    Tensor tri_tokens;  // (3 * tokens_per_plane, d_model)
    std::vector<BlockParams> blocks;
    Tensor final_ln_g, final_ln_b;
    Tensor up_w, up_b;  // d_model -> patch^2 * c
    Tensor sdf_w0, sdf_b0, sdf_w1, sdf_b1, sdf_w2, sdf_b2;
    Tensor rgb_w0, rgb_b0, rgb_w1, rgb_b1, rgb_w2, rgb_b2;
    Tensor beta_raw;  // softplus(beta_raw) = beta

    std::vector<Tensor> all() const;
};

struct Triplane {
    // Planes stored as (P*P, c), row-major over (v,u):
    // xy: v=y,u=x; yz: v=z,u=y; xz: v=z,u=x.
    Tensor xy, yz, xz;
    int res = 0;
    int channels = 0;
};

struct Model {
    ModelConfig cfg;
    Params p;

    void init(nn::Rng& rng);
    std::vector<Tensor> parameters() const { return p.all(); }
    // softplus(beta_raw) as a graph tensor.
    Tensor beta() const;
};

// Disables gradient tracking on the model's parameters for its lifetime.
struct NoGradGuard {
    std::vector<Tensor> params;
    explicit NoGradGuard(const Model& m);
    ~NoGradGuard();
};

// --- tokenization -----------------------------------------------------------
// Row-major patch flattening of an H x W x C grid (pixel-major, channel-minor),
// then a linear projection. grid.size() must equal H*W*C.
Tensor patch_embed(const std::vector<double>& grid, int height, int width, int channels,
                   int patch_size, const Tensor& weight, const Tensor& bias);

// Flattened 6-channel Plücker grid for patch_embed.
std::vector<double> plucker_grid(const geom::Camera& cam);
// Flattened RGB grid from a GTView-style image.
std::vector<double> rgb_grid(const std::vector<Vec3>& rgb);

// Replaces flagged positions with the learnable mask token (image tokens only).
Tensor apply_mask_tokens(const Tensor& tokens, const mask::PatchMask& m, const Tensor& mask_token);

// x = concat over non-conditional views of (image + plucker tokens),
// z = cond image tokens + cond plucker tokens.
std::pair<Tensor, Tensor> assemble_inputs(const std::vector<Tensor>& view_image_tokens,
                                          const std::vector<Tensor>& view_plucker_tokens,
                                          const Tensor& cond_image_tokens,
                                          const Tensor& cond_plucker_tokens);

// Runs the transformer; returns (x_hat, t_hat).
std::pair<Tensor, Tensor> transformer_forward(const Model& m, const Tensor& x, const Tensor& z);

// Final LN + single-layer MLP upsample of triplane tokens into feature planes.
Triplane upsample_triplanes(const Model& m, const Tensor& t_hat);

// Bilinear triplane features at points (n x 3 world coords in [-1,1]^3,
// clamped); output (n, 3c), plane order xy | yz | xz.
Tensor sample_triplane(const Triplane& planes, const std::vector<double>& points);

Tensor decode_sdf(const Model& m, const Tensor& latent);  // (n,1)
Tensor decode_rgb(const Model& m, const Tensor& latent);  // (n,3), sigmoid

// Full conditional forward: masked views + clean conditional view -> triplane.
struct ViewInput {
    std::vector<double> image;    // H*W*3 flattened rgb grid
    geom::Camera camera;
    mask::PatchMask mask;         // may be empty (all false)
};

Triplane forward_to_triplane(const Model& m, const std::vector<ViewInput>& views,
                             const ViewInput& cond, bool corrupt_cond = false);

}  // namespace trirec::model
