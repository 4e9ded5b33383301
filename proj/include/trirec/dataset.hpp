#pragma once

#include <string>
#include <vector>

#include "trirec/geometry.hpp"
#include "trirec/scene.hpp"

namespace trirec::data {

struct DatasetSpec {
    int n_scenes = 8;
    int n_views = 12;       // posed views rendered per scene
    int resolution = 64;
    double fov_y = 0.6;
    uint64_t seed = 0;
    bool editable_family = false;  // two-part body+attachment scenes
};

// One scene's renders plus its analytic description. The SceneSDF is kept so
// supervision crops and depth oracles can be re-rendered exactly on demand.
struct SceneData {
    scene::SceneSDF sdf;
    std::vector<geom::Camera> cameras;
    std::vector<scene::GTView> views;
};

// Writes scene_000/, scene_001/, ... under root, each holding scene.txt,
// cams.txt and per-view rgb_k.png, depth_k.f32, normal_k.f32, sil_k.png.
// Deterministic under seed.
void generate_dataset(const std::string& root, const DatasetSpec& spec);

// Scene directories under root in lexicographic order.
std::vector<std::string> list_scene_dirs(const std::string& root);

// Loads one scene directory. Views are re-rendered from scene.txt when
// from_files is false (exact doubles); otherwise read back from the files.
SceneData load_scene_dir(const std::string& dir, bool from_files = false);

void save_scene_dir(const std::string& dir, const SceneData& data);

}  // namespace trirec::data
