#include "trirec/pipeline.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace trirec::pipe {

Triplane reconstruct(const Model& m, const data::SceneData& scene, const ReconRequest& req) {
    if (req.input_views.empty()) throw std::invalid_argument("reconstruct: no input views");
    for (int vi : req.input_views)
        if (vi == req.cond_index)
            throw std::invalid_argument("reconstruct: conditional view listed as input");
    std::vector<model::ViewInput> inputs;
    for (int vi : req.input_views) {
        size_t i = static_cast<size_t>(vi);
        if (i >= scene.views.size()) throw std::out_of_range("reconstruct: view index");
        model::ViewInput in;
        in.image = model::rgb_grid(scene.views[i].rgb);
        in.camera = scene.cameras[i];
        if (req.occluder)
            in.mask = mask::build_view_mask(scene.views[i].depth, *req.occluder,
                                            scene.cameras[i], m.cfg.patch_size);
        inputs.push_back(std::move(in));
    }
    model::ViewInput cond;
    size_t ci = static_cast<size_t>(req.cond_index);
    cond.image = model::rgb_grid(scene.views[ci].rgb);
    cond.camera = scene.cameras[ci];
    return model::forward_to_triplane(m, inputs, cond, req.corrupt_cond);
}

RenderedView render_full_view(const Model& m, const Triplane& planes, const geom::Camera& cam,
                              int n_samples, bool with_normals) {
    model::NoGradGuard guard(m);
    volren::RenderOptions opt;
    opt.n_samples = n_samples;
    opt.mode = volren::SampleMode::Midpoint;
    opt.with_normals = with_normals;

    RenderedView out;
    out.height = cam.height;
    out.width = cam.width;
    size_t n = static_cast<size_t>(cam.height) * cam.width;
    out.rgb.resize(n);
    out.opacity.resize(n);
    out.normal.assign(n, Vec3(0, 0, 0));

    // Ray-band chunking keeps the per-call graph around 16k samples.
    int band = std::max(1, 16384 / std::max(1, cam.width * n_samples));
    for (int row0 = 0; row0 < cam.height; row0 += band) {
        int rows = std::min(band, cam.height - row0);
        volren::CropRect crop{row0, 0, rows, cam.width};
        RenderedView part = to_host(volren::render_view(m, planes, cam, crop, opt));
        size_t off = static_cast<size_t>(row0) * cam.width;
        size_t cnt = static_cast<size_t>(rows) * cam.width;
        std::copy(part.rgb.begin(), part.rgb.end(), out.rgb.begin() + off);
        std::copy(part.opacity.begin(), part.opacity.end(), out.opacity.begin() + off);
        std::copy(part.normal.begin(), part.normal.begin() + cnt, out.normal.begin() + off);
    }
    return out;
}

RenderedView to_host(const volren::PredView& pred) {
    RenderedView out;
    out.height = pred.height;
    out.width = pred.width;
    size_t n = static_cast<size_t>(pred.height) * pred.width;
    out.rgb.resize(n);
    out.opacity.resize(n);
    out.normal.assign(n, Vec3(0, 0, 0));
    for (size_t i = 0; i < n; ++i) {
        out.rgb[i] = Vec3(pred.rgb->value[3 * i], pred.rgb->value[3 * i + 1],
                          pred.rgb->value[3 * i + 2]);
        out.opacity[i] = pred.opacity->value[i];
        if (pred.has_normals)
            out.normal[i] = Vec3(pred.normal->value[3 * i], pred.normal->value[3 * i + 1],
                                 pred.normal->value[3 * i + 2]);
    }
    return out;
}

metrics::Image to_image(const std::vector<Vec3>& rgb, int height, int width) {
    metrics::Image img;
    img.height = height;
    img.width = width;
    img.channels = 3;
    img.data.reserve(rgb.size() * 3);
    for (const Vec3& v : rgb) {
        img.data.push_back(v.x);
        img.data.push_back(v.y);
        img.data.push_back(v.z);
    }
    return img;
}

std::vector<uint8_t> mask_pixels(const mask::PatchMask& m) {
    int h = m.rows * m.patch_size;
    int w = m.cols * m.patch_size;
    std::vector<uint8_t> px(static_cast<size_t>(h) * w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            px[static_cast<size_t>(r) * w + c] =
                m.at(r / m.patch_size, c / m.patch_size) ? 1 : 0;
    return px;
}

EditResult edit(const Model& m, const data::SceneData& scene, const EditRequest& req,
                int n_samples, int mesh_res) {
    size_t ci = static_cast<size_t>(req.cond_index);
    if (ci >= scene.views.size()) throw std::out_of_range("edit: conditional view index");
    const scene::GTView& cv = scene.views[ci];
    if (req.edited_cond_image.size() != cv.rgb.size())
        throw std::invalid_argument("edit: edited image resolution mismatch");

    std::vector<model::ViewInput> inputs;
    for (int vi : req.input_views) {
        if (vi == req.cond_index) throw std::invalid_argument("edit: conditional view as input");
        size_t i = static_cast<size_t>(vi);
        model::ViewInput in;
        in.image = model::rgb_grid(scene.views[i].rgb);
        in.camera = scene.cameras[i];
        in.mask = mask::build_view_mask(scene.views[i].depth, req.edit_box, scene.cameras[i],
                                        m.cfg.patch_size);
        inputs.push_back(std::move(in));
    }
    model::ViewInput cond;
    cond.image = model::rgb_grid(req.edited_cond_image);
    cond.camera = scene.cameras[ci];

    EditResult res;
    res.planes = model::forward_to_triplane(m, inputs, cond);
    for (const geom::Camera& cam : scene.cameras)
        res.renders.push_back(render_full_view(m, res.planes, cam, n_samples, true));
    extract::ScalarGrid grid = extract::evaluate_sdf_grid(m, res.planes, mesh_res);
    res.mesh = extract::marching_cubes(grid);
    extract::colorize(res.mesh, m, res.planes);
    return res;
}

std::vector<Vec3> composite_donor(const std::vector<Vec3>& base, const scene::SceneSDF& donor,
                                  const geom::Camera& cam, const geom::BoxOccluder& box) {
    if (base.size() != static_cast<size_t>(cam.height) * cam.width)
        throw std::invalid_argument("composite_donor: resolution mismatch");
    scene::GTView donor_view = scene::render_ground_truth(donor, cam);
    std::vector<Vec3> out = base;
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            Vec3 o, d;
            geom::pixel_ray(cam, r, c, o, d);
            if (geom::ray_box_depth(o, d, box))
                out[static_cast<size_t>(r) * cam.width + c] =
                    donor_view.rgb[static_cast<size_t>(r) * cam.width + c];
        }
    }
    return out;
}

metrics::EvalReport eval_run(const Model& m, const std::vector<data::SceneData>& scenes,
                             const EvalConfig& cfg) {
    if (scenes.empty()) throw std::invalid_argument("eval_run: no scenes");
    metrics::EvalReport report;
    geom::Rng rng(cfg.seed);
    for (const data::SceneData& sc : scenes) {
        int n_views = static_cast<int>(sc.cameras.size());
        if (n_views < cfg.n_input_views + 1)
            throw std::runtime_error("eval_run: scene has too few views");
        ReconRequest req;
        req.cond_index = 0;
        for (int i = 1; i <= cfg.n_input_views; ++i) req.input_views.push_back(i);
        req.occluder = cfg.occluder;
        Triplane planes = reconstruct(m, sc, req);

        // Held-out poses: freshly sampled, so disjoint from dataset poses by
        // construction (checked against the stored camera centers anyway).
        const geom::Camera& ref = sc.cameras[0];
        for (int k = 0; k < cfg.n_heldout; ++k) {
            geom::Camera cam = scene::sample_camera(rng, ref.height, ref.width, ref.fov_y);
            Vec3 eye = cam.cam_to_world.apply_point(Vec3(0, 0, 0));
            for (const geom::Camera& used : sc.cameras) {
                Vec3 ueye = used.cam_to_world.apply_point(Vec3(0, 0, 0));
                if (norm(eye - ueye) < 1e-9)
                    throw std::runtime_error("eval_run: held-out pose overlaps an input pose");
            }
            RenderedView rv = render_full_view(m, planes, cam, cfg.samples_per_ray);
            scene::GTView gt = scene::render_ground_truth(sc.sdf, cam);
            metrics::ViewMetrics vm;
            metrics::Image pi = to_image(rv.rgb, rv.height, rv.width);
            metrics::Image gi = to_image(gt.rgb, gt.height, gt.width);
            vm.psnr = metrics::psnr(pi, gi);
            vm.ssim = metrics::ssim(pi, gi);
            vm.psnr_masked = 99.0;
            vm.psnr_unmasked = vm.psnr;
            report.per_view.push_back(vm);
        }

        // Masked/unmasked split on the input poses (where masks are defined).
        if (cfg.occluder) {
            for (int vi : req.input_views) {
                size_t i = static_cast<size_t>(vi);
                mask::PatchMask pm = mask::build_view_mask(sc.views[i].depth, *cfg.occluder,
                                                           sc.cameras[i], m.cfg.patch_size);
                std::vector<uint8_t> sel = mask_pixels(pm);
                std::vector<uint8_t> inv(sel.size());
                for (size_t j = 0; j < sel.size(); ++j) inv[j] = sel[j] ? 0 : 1;
                RenderedView rv =
                    render_full_view(m, planes, sc.cameras[i], cfg.samples_per_ray);
                metrics::Image pi = to_image(rv.rgb, rv.height, rv.width);
                metrics::Image gi = to_image(sc.views[i].rgb, rv.height, rv.width);
                metrics::ViewMetrics vm;
                vm.psnr = metrics::psnr(pi, gi);
                vm.ssim = metrics::ssim(pi, gi);
                vm.psnr_masked = metrics::psnr_masked(pi, gi, sel);
                vm.psnr_unmasked = metrics::psnr_masked(pi, gi, inv);
                report.per_view.push_back(vm);
            }
        }
    }
    report.accumulate();
    return report;
}

}  // namespace trirec::pipe
