// Command-line entry point: dataset generation, training, reconstruction,
// editing, mesh extraction, evaluation and gradient checking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trirec/config.hpp"
#include "trirec/dataset.hpp"
#include "trirec/extraction.hpp"
#include "trirec/gradcheck_suite.hpp"
#include "trirec/image_io.hpp"
#include "trirec/pipeline.hpp"
#include "trirec/training.hpp"

namespace fs = std::filesystem;
using namespace trirec;

namespace {

struct CliError : std::runtime_error {
    int code;
    CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

geom::BoxOccluder parse_box(const std::vector<double>& v) {
    if (v.size() != 6) throw CliError(1, "box must be cx,cy,cz,hx,hy,hz");
    geom::BoxOccluder box;
    box.center = Vec3(v[0], v[1], v[2]);
    box.half_extents = Vec3(v[3], v[4], v[5]);
    if (box.half_extents.x <= 0 || box.half_extents.y <= 0 || box.half_extents.z <= 0)
        throw CliError(1, "box half extents must be positive");
    const double* c = &box.center.x;
    const double* h = &box.half_extents.x;
    for (int i = 0; i < 3; ++i)
        if (c[i] - h[i] > 1.0 || c[i] + h[i] < -1.0)
            throw CliError(1, "box outside [-1,1]^3");
    return box;
}

cfg::ConfigMap load_config(const std::string& path) {
    if (path.empty()) return cfg::ConfigMap();
    return cfg::ConfigMap::from_file(path);
}

model::Model load_model(const std::string& ckpt, const cfg::ConfigMap& c, uint64_t seed) {
    model::Model m;
    m.cfg = cfg::model_config_from(c);
    nn::Rng rng(seed);
    m.init(rng);
    if (!ckpt.empty()) {
        if (!nn::checkpoint_exists(ckpt)) throw CliError(2, "checkpoint not found");
        nn::load_checkpoint(ckpt, m.parameters());
    }
    return m;
}

void save_rendered(const std::string& dir, const pipe::RenderedView& rv, int k) {
    fs::create_directories(dir);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s/render_%d.png", dir.c_str(), k);
    io::save_png_rgb(buf, rv.rgb, rv.height, rv.width);
    std::snprintf(buf, sizeof(buf), "%s/opacity_%d.f32", dir.c_str(), k);
    io::save_f32(buf, rv.opacity);
    std::snprintf(buf, sizeof(buf), "%s/normal_%d.f32", dir.c_str(), k);
    io::save_f32_vec3(buf, rv.normal);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional masked triplane reconstruction"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    std::string config_path;
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
    app.add_option("--config", config_path, "plain-text key=value config file");

    // dataset gen
    auto* dataset_cmd = app.add_subcommand("dataset", "dataset utilities");
    auto* gen = dataset_cmd->add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_out;
    data::DatasetSpec dspec;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n", dspec.n_scenes, "number of scenes")->capture_default_str();
    gen->add_option("--views", dspec.n_views, "views per scene")->capture_default_str();
    gen->add_option("--res", dspec.resolution, "image resolution")->capture_default_str();
    gen->add_option("--fov", dspec.fov_y, "vertical field of view (rad)")->capture_default_str();
    gen->add_flag("--editable", dspec.editable_family, "two-part body+attachment scenes");

    // train
    auto* train_cmd = app.add_subcommand("train", "run one training stage");
    std::string train_data, train_resume;
    int train_stage_n = 0;
    train_cmd->add_option("--data", train_data, "dataset root")->required();
    train_cmd->add_option("--stage", train_stage_n, "training stage (1 or 2)");
    train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

    // reconstruct
    auto* rec_cmd = app.add_subcommand("reconstruct", "single forward reconstruction");
    std::string rec_ckpt, rec_scene, rec_out;
    int rec_cond = 0, rec_samples = 64;
    std::vector<int> rec_inputs;
    std::vector<double> rec_box;
    bool rec_corrupt = false;
    rec_cmd->add_option("--ckpt", rec_ckpt, "model checkpoint")->required();
    rec_cmd->add_option("--views", rec_scene, "scene directory")->required();
    rec_cmd->add_option("--cond", rec_cond, "conditional view index")->capture_default_str();
    rec_cmd->add_option("--inputs", rec_inputs, "input view indices")->delimiter(',')->required();
    rec_cmd->add_option("--box", rec_box, "occluder cx,cy,cz,hx,hy,hz")->delimiter(',');
    rec_cmd->add_flag("--corrupt-cond", rec_corrupt, "mask the conditional image fully");
    rec_cmd->add_option("--samples", rec_samples, "samples per ray")->capture_default_str();
    rec_cmd->add_option("--out", rec_out, "output directory")->required();

    // edit
    auto* edit_cmd = app.add_subcommand("edit", "conditional 3D edit");
    std::string edit_ckpt, edit_scene, edit_img, edit_out;
    int edit_cond = 0, edit_samples = 64, edit_mesh_res = 64;
    std::vector<int> edit_inputs;
    std::vector<double> edit_box;
    edit_cmd->add_option("--ckpt", edit_ckpt, "model checkpoint")->required();
    edit_cmd->add_option("--views", edit_scene, "scene directory")->required();
    edit_cmd->add_option("--cond", edit_cond, "conditional view index")->capture_default_str();
    edit_cmd->add_option("--inputs", edit_inputs, "input view indices")
        ->delimiter(',')
        ->required();
    edit_cmd->add_option("--edited", edit_img, "edited conditional image (png)")->required();
    edit_cmd->add_option("--box", edit_box, "edit region cx,cy,cz,hx,hy,hz")
        ->delimiter(',')
        ->required();
    edit_cmd->add_option("--samples", edit_samples, "samples per ray")->capture_default_str();
    edit_cmd->add_option("--mesh-res", edit_mesh_res, "extraction grid resolution")
        ->capture_default_str();
    edit_cmd->add_option("--out", edit_out, "output directory")->required();

    // extract
    auto* ext_cmd = app.add_subcommand("extract", "mesh extraction");
    std::string ext_ckpt, ext_scene, ext_out;
    int ext_res = 128, ext_cond = 0;
    std::vector<int> ext_inputs;
    ext_cmd->add_option("--ckpt", ext_ckpt, "model checkpoint")->required();
    ext_cmd->add_option("--views", ext_scene, "scene directory")->required();
    ext_cmd->add_option("--cond", ext_cond, "conditional view index")->capture_default_str();
    ext_cmd->add_option("--inputs", ext_inputs, "input view indices")->delimiter(',')->required();
    ext_cmd->add_option("--res", ext_res, "grid resolution")->capture_default_str();
    ext_cmd->add_option("--out", ext_out, "output OBJ path")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "novel-view metrics");
    std::string eval_ckpt, eval_data, eval_out;
    pipe::EvalConfig ecfg;
    std::vector<double> eval_box;
    eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--data", eval_data, "dataset root")->required();
    eval_cmd->add_option("--inputs-n", ecfg.n_input_views, "input view count")
        ->capture_default_str();
    eval_cmd->add_option("--heldout", ecfg.n_heldout, "held-out poses per scene")
        ->capture_default_str();
    eval_cmd->add_option("--samples", ecfg.samples_per_ray, "samples per ray")
        ->capture_default_str();
    eval_cmd->add_option("--box", eval_box, "occluder cx,cy,cz,hx,hy,hz")->delimiter(',');
    eval_cmd->add_option("--out", eval_out, "report path prefix (writes .txt and .csv)");

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    bool gc_all = false;
    std::string gc_op;
    double gc_tol = 1e-4;
    gc_cmd->add_flag("--all", gc_all, "run every op plus end-to-end checks");
    gc_cmd->add_option("--op", gc_op, "run checks whose name contains this substring");
    gc_cmd->add_option("--tol", gc_tol, "max relative error")->capture_default_str();

    // composite (edit test-data helper)
    auto* comp_cmd = app.add_subcommand(
        "composite", "paste a donor scene's box-projected pixels into a view");
    std::string comp_scene, comp_donor, comp_out;
    int comp_view = 0;
    std::vector<double> comp_box;
    comp_cmd->add_option("--views", comp_scene, "base scene directory")->required();
    comp_cmd->add_option("--donor", comp_donor, "donor scene directory")->required();
    comp_cmd->add_option("--view", comp_view, "view index")->capture_default_str();
    comp_cmd->add_option("--box", comp_box, "region cx,cy,cz,hx,hy,hz")
        ->delimiter(',')
        ->required();
    comp_cmd->add_option("--out", comp_out, "output PNG path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        cfg::ConfigMap conf = load_config(config_path);

        if (gen->parsed()) {
            dspec.seed = seed;
            data::generate_dataset(gen_out, dspec);
            std::cout << "wrote " << dspec.n_scenes << " scenes to " << gen_out << "\n";
        } else if (train_cmd->parsed()) {
            train::TrainConfig tcfg = train::train_config_from(conf);
            if (train_stage_n != 0) {
                tcfg.stage = train_stage_n;
                // CLI stage wins over the config file; refresh its defaults
                // unless the file overrode them explicitly.
                if (!conf.has("stage")) {
                    train::TrainConfig fresh;
                    fresh.stage = train_stage_n;
                    fresh.apply_stage_defaults();
                    if (!conf.has("w_normal")) tcfg.weights.w_normal = fresh.weights.w_normal;
                    if (!conf.has("samples_per_ray")) tcfg.samples_per_ray = fresh.samples_per_ray;
                    if (!conf.has("peak_lr")) tcfg.peak_lr = fresh.peak_lr;
                }
            }
            if (app.count("--seed") > 0) tcfg.seed = seed;
            if (!train_resume.empty() && !nn::checkpoint_exists(train_resume))
                throw CliError(2, "checkpoint not found");
            std::vector<data::SceneData> scenes;
            for (const std::string& d : data::list_scene_dirs(train_data))
                scenes.push_back(data::load_scene_dir(d));
            model::Model m;
            m.cfg = cfg::model_config_from(conf);
            nn::Rng rng(tcfg.seed);
            m.init(rng);
            train::TrainResult r = train::train_stage(m, scenes, tcfg, train_resume);
            std::cout << "final checkpoint " << r.final_checkpoint << " loss " << r.final_loss
                      << " steps " << r.total_steps << "\n";
        } else if (rec_cmd->parsed()) {
            model::Model m = load_model(rec_ckpt, conf, seed);
            data::SceneData scene = data::load_scene_dir(rec_scene);
            pipe::ReconRequest req;
            req.cond_index = rec_cond;
            req.input_views = rec_inputs;
            if (!rec_box.empty()) req.occluder = parse_box(rec_box);
            req.corrupt_cond = rec_corrupt;
            model::Triplane planes = pipe::reconstruct(m, scene, req);
            for (size_t k = 0; k < scene.cameras.size(); ++k) {
                pipe::RenderedView rv =
                    pipe::render_full_view(m, planes, scene.cameras[k], rec_samples, true);
                save_rendered(rec_out, rv, static_cast<int>(k));
            }
            std::cout << "wrote " << scene.cameras.size() << " renders to " << rec_out << "\n";
        } else if (edit_cmd->parsed()) {
            model::Model m = load_model(edit_ckpt, conf, seed);
            data::SceneData scene = data::load_scene_dir(edit_scene);
            pipe::EditRequest req;
            req.cond_index = edit_cond;
            req.input_views = edit_inputs;
            req.edit_box = parse_box(edit_box);
            int h = 0, w = 0;
            req.edited_cond_image = io::load_png_rgb(edit_img, h, w);
            pipe::EditResult res = pipe::edit(m, scene, req, edit_samples, edit_mesh_res);
            fs::create_directories(edit_out);
            for (size_t k = 0; k < res.renders.size(); ++k)
                save_rendered(edit_out, res.renders[k], static_cast<int>(k));
            extract::export_obj(res.mesh, edit_out + "/mesh.obj");
            std::cout << "wrote " << res.renders.size() << " renders and mesh.obj to "
                      << edit_out << "\n";
        } else if (ext_cmd->parsed()) {
            model::Model m = load_model(ext_ckpt, conf, seed);
            data::SceneData scene = data::load_scene_dir(ext_scene);
            pipe::ReconRequest req;
            req.cond_index = ext_cond;
            req.input_views = ext_inputs;
            model::Triplane planes = pipe::reconstruct(m, scene, req);
            extract::ScalarGrid grid = extract::evaluate_sdf_grid(m, planes, ext_res);
            extract::Mesh mesh = extract::marching_cubes(grid);
            extract::colorize(mesh, m, planes);
            extract::export_obj(mesh, ext_out);
            std::cout << "wrote mesh with " << mesh.vertices.size() << " vertices, "
                      << mesh.triangles.size() << " triangles to " << ext_out << "\n";
        } else if (eval_cmd->parsed()) {
            model::Model m = load_model(eval_ckpt, conf, seed);
            if (!eval_box.empty()) ecfg.occluder = parse_box(eval_box);
            ecfg.seed = seed + 7919;  // held-out pose stream distinct from dataset seeds
            std::vector<data::SceneData> scenes;
            for (const std::string& d : data::list_scene_dirs(eval_data))
                scenes.push_back(data::load_scene_dir(d));
            metrics::EvalReport report = pipe::eval_run(m, scenes, ecfg);
            std::cout << report.table();
            if (!eval_out.empty()) {
                std::ofstream(eval_out + ".txt") << report.table();
                std::ofstream(eval_out + ".csv") << report.csv();
            }
        } else if (gc_cmd->parsed()) {
            if (!gc_all && gc_op.empty()) throw CliError(1, "gradcheck needs --all or --op");
            std::vector<nn::GradCheckResult> results = nn::run_op_gradchecks(seed);
            std::vector<nn::GradCheckResult> e2e = nn::run_end_to_end_gradchecks(seed);
            results.insert(results.end(), e2e.begin(), e2e.end());
            bool ok = true;
            int ran = 0;
            for (const nn::GradCheckResult& r : results) {
                if (!gc_op.empty() && r.name.find(gc_op) == std::string::npos) continue;
                ++ran;
                bool pass = r.max_rel_err < gc_tol;
                ok = ok && pass;
                std::printf("%-24s %.3e %s\n", r.name.c_str(), r.max_rel_err,
                            pass ? "pass" : "FAIL");
            }
            if (ran == 0) throw CliError(1, "no gradcheck matches --op " + gc_op);
            if (!ok) throw CliError(1, "gradcheck failed");
        } else if (comp_cmd->parsed()) {
            data::SceneData base = data::load_scene_dir(comp_scene);
            data::SceneData donor = data::load_scene_dir(comp_donor);
            size_t vi = static_cast<size_t>(comp_view);
            if (vi >= base.views.size()) throw CliError(1, "view index out of range");
            std::vector<Vec3> out = pipe::composite_donor(
                base.views[vi].rgb, donor.sdf, base.cameras[vi], parse_box(comp_box));
            io::save_png_rgb(comp_out, out, base.views[vi].height, base.views[vi].width);
            std::cout << "wrote " << comp_out << "\n";
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
