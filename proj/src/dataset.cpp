#include "trirec/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "trirec/image_io.hpp"

namespace trirec::data {

namespace fs = std::filesystem;

namespace {

std::string view_path(const std::string& dir, const char* stem, int k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%d.%s", stem, k, ext);
    return dir + "/" + buf;
}

}  // namespace

void save_scene_dir(const std::string& dir, const SceneData& data) {
    fs::create_directories(dir);
    scene::save_scene(dir + "/scene.txt", data.sdf);
    geom::save_cameras(dir + "/cams.txt", data.cameras);
    if (data.views.size() != data.cameras.size())
        throw std::invalid_argument("save_scene_dir: view/camera count mismatch");
    for (size_t k = 0; k < data.views.size(); ++k) {
        const scene::GTView& v = data.views[k];
        int ik = static_cast<int>(k);
        io::save_png_rgb(view_path(dir, "rgb", ik, "png"), v.rgb, v.height, v.width);
        io::save_f32(view_path(dir, "depth", ik, "f32"), v.depth);
        io::save_f32_vec3(view_path(dir, "normal", ik, "f32"), v.normal);
        io::save_png_gray(view_path(dir, "sil", ik, "png"), v.sil, v.height, v.width);
    }
}

void generate_dataset(const std::string& root, const DatasetSpec& spec) {
    if (spec.n_scenes < 1 || spec.n_views < 1 || spec.resolution < 8)
        throw std::invalid_argument("generate_dataset: bad spec");
    fs::create_directories(root);
    for (int s = 0; s < spec.n_scenes; ++s) {
        // Independent stream per scene so scene s is the same regardless of
        // how many scenes precede it.
        geom::Rng rng(spec.seed * 1000003ull + static_cast<uint64_t>(s));
        SceneData data;
        if (spec.editable_family) {
            data.sdf = scene::generate_editable_scene(rng);
        } else {
            data.sdf = scene::generate_random_scene(rng, scene::SceneSpec{});
        }
        // Random phase so the ring differs per scene but stays well-spread.
        std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
        data.cameras = scene::camera_ring(spec.n_views, spec.resolution, spec.resolution, 20.0,
                                          spec.fov_y, phase(rng));
        data.views.reserve(data.cameras.size());
        for (const geom::Camera& cam : data.cameras)
            data.views.push_back(scene::render_ground_truth(data.sdf, cam));
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%03d", s);
        save_scene_dir(root + "/" + name, data);
    }
}

std::vector<std::string> list_scene_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (!fs::is_directory(root)) throw std::runtime_error("not a dataset directory: " + root);
    for (const fs::directory_entry& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "scene.txt"))
            dirs.push_back(e.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no scene directories under: " + root);
    return dirs;
}

SceneData load_scene_dir(const std::string& dir, bool from_files) {
    SceneData data;
    data.sdf = scene::load_scene(dir + "/scene.txt");
    data.cameras = geom::load_cameras(dir + "/cams.txt");
    data.views.reserve(data.cameras.size());
    for (size_t k = 0; k < data.cameras.size(); ++k) {
        if (from_files) {
            scene::GTView v;
            int h = 0, w = 0;
            int ik = static_cast<int>(k);
            v.rgb = io::load_png_rgb(view_path(dir, "rgb", ik, "png"), h, w);
            v.height = h;
            v.width = w;
            v.depth = io::load_f32(view_path(dir, "depth", ik, "f32"));
            v.normal = io::load_f32_vec3(view_path(dir, "normal", ik, "f32"));
            v.sil = io::load_png_gray(view_path(dir, "sil", ik, "png"), h, w);
            if (v.depth.size() != v.rgb.size() || v.normal.size() != v.rgb.size() ||
                v.sil.size() != v.rgb.size())
                throw std::runtime_error("inconsistent view files in " + dir);
            data.views.push_back(std::move(v));
        } else {
            data.views.push_back(scene::render_ground_truth(data.sdf, data.cameras[k]));
        }
    }
    return data;
}

}  // namespace trirec::data
