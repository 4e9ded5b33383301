#include "trirec/masking.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace trirec::mask {

size_t PatchMask::count() const {
    return static_cast<size_t>(std::count(flags.begin(), flags.end(), uint8_t{1}));
}

std::vector<double> render_occluder_depth(const BoxOccluder& box, const Camera& cam) {
    std::vector<double> depth(static_cast<size_t>(cam.height) * cam.width, scene::kInfDepth);
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            Vec3 o, d;
            geom::pixel_ray(cam, r, c, o, d);
            auto t = geom::ray_box_depth(o, d, box);
            if (t) depth[static_cast<size_t>(r) * cam.width + c] = *t;
        }
    }
    return depth;
}

std::vector<uint8_t> occluded_pixels(const std::vector<double>& shape_depth,
                                     const std::vector<double>& occluder_depth) {
    if (shape_depth.size() != occluder_depth.size())
        throw std::invalid_argument("occluded_pixels: resolution mismatch");
    std::vector<uint8_t> out(shape_depth.size(), 0);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = (std::isfinite(occluder_depth[i]) && occluder_depth[i] < shape_depth[i]) ? 1 : 0;
    return out;
}

PatchMask pixels_to_patch_mask(const std::vector<uint8_t>& occluded, int height, int width,
                               int patch_size) {
    if (patch_size <= 0 || height % patch_size != 0 || width % patch_size != 0)
        throw std::invalid_argument("pixels_to_patch_mask: patch size must divide resolution");
    if (occluded.size() != static_cast<size_t>(height) * width)
        throw std::invalid_argument("pixels_to_patch_mask: pixel count mismatch");
    PatchMask m;
    m.rows = height / patch_size;
    m.cols = width / patch_size;
    m.patch_size = patch_size;
    m.flags.assign(static_cast<size_t>(m.rows) * m.cols, 0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (occluded[static_cast<size_t>(r) * width + c])
                m.flags[static_cast<size_t>(r / patch_size) * m.cols + c / patch_size] = 1;
    return m;
}

PatchMask build_view_mask(const std::vector<double>& shape_depth, const BoxOccluder& box,
                          const Camera& cam, int patch_size) {
    auto occ_depth = render_occluder_depth(box, cam);
    return pixels_to_patch_mask(occluded_pixels(shape_depth, occ_depth), cam.height, cam.width,
                                patch_size);
}

std::vector<PatchMask> build_view_masks(const scene::SceneSDF& sc, const BoxOccluder& box,
                                        const std::vector<Camera>& cameras, int patch_size) {
    std::vector<PatchMask> masks;
    masks.reserve(cameras.size());
    for (const auto& cam : cameras) {
        std::vector<double> shape_depth(static_cast<size_t>(cam.height) * cam.width);
        for (int r = 0; r < cam.height; ++r)
            for (int c = 0; c < cam.width; ++c) {
                Vec3 o, d;
                geom::pixel_ray(cam, r, c, o, d);
                shape_depth[static_cast<size_t>(r) * cam.width + c] = scene::trace_ray(sc, o, d);
            }
        masks.push_back(build_view_mask(shape_depth, box, cam, patch_size));
    }
    return masks;
}

PatchMask uniform_random_mask(Rng& rng, int rows, int cols, int patch_size, double ratio) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("uniform_random_mask: ratio out of [0,1]");
    PatchMask m;
    m.rows = rows;
    m.cols = cols;
    m.patch_size = patch_size;
    size_t n = static_cast<size_t>(rows) * cols;
    m.flags.assign(n, 0);
    size_t k = static_cast<size_t>(ratio * static_cast<double>(n));
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // Fisher-Yates prefix shuffle.
    for (size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> u(i, n - 1);
        std::swap(idx[i], idx[u(rng)]);
        m.flags[idx[i]] = 1;
    }
    return m;
}

void save_masks(const std::string& path, const std::vector<PatchMask>& masks) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& m : masks) {
        for (uint8_t v : m.flags) f << (v ? '1' : '0');
        f << "\n";
    }
}

std::vector<PatchMask> load_masks(const std::string& path, int rows, int cols, int patch_size) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<PatchMask> masks;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.size() != static_cast<size_t>(rows) * cols)
            throw std::runtime_error("mask line length mismatch in " + path);
        PatchMask m;
        m.rows = rows;
        m.cols = cols;
        m.patch_size = patch_size;
        m.flags.resize(line.size());
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] != '0' && line[i] != '1')
                throw std::runtime_error("mask character must be 0/1 in " + path);
            m.flags[i] = line[i] == '1' ? 1 : 0;
        }
        masks.push_back(std::move(m));
    }
    return masks;
}

}  // namespace trirec::mask
