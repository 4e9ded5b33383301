#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trirec/volren.hpp"

using namespace trirec;
using namespace trirec::volren;
using nn::Tensor;

namespace {

model::Model tiny_model(uint64_t seed, bool randomize) {
    model::Model m;
    m.cfg.patch_size = 4;
    m.cfg.input_res = 8;
    m.cfg.d_model = 8;
    m.cfg.n_heads = 2;
    m.cfg.n_layers = 1;
    m.cfg.plane_res = 8;
    m.cfg.plane_channels = 4;
    m.cfg.decode_hidden = 8;
    m.cfg.mlp_ratio = 2;
    nn::Rng rng(seed);
    m.init(rng);
    if (randomize) {
        std::uniform_real_distribution<double> u(-0.25, 0.25);
        for (const Tensor& p : m.parameters())
            if (p != m.p.beta_raw)
                for (double& v : p->value) v = u(rng);
    }
    return m;
}

Triplane random_planes(const model::Model& m, uint64_t seed) {
    nn::Rng rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Triplane t;
    t.res = m.cfg.plane_res;
    t.channels = m.cfg.plane_channels;
    auto mk = [&] {
        std::vector<double> v(static_cast<size_t>(t.res) * t.res * t.channels);
        for (double& x : v) x = u(rng);
        return nn::constant({static_cast<int64_t>(t.res) * t.res, t.channels}, v);
    };
    t.xy = mk();
    t.yz = mk();
    t.xz = mk();
    return t;
}

// Forces the SDF head to ignore the triplane and return a constant.
void make_constant_sdf(model::Model& m, double value) {
    for (double& v : m.p.sdf_w2->value) v = 0.0;
    m.p.sdf_b2->value[0] = value;
}

double decode_sdf_at(const model::Model& m, const Triplane& planes, const Vec3& p) {
    Tensor lat = model::sample_triplane(planes, {p.x, p.y, p.z});
    return model::decode_sdf(m, lat)->value[0];
}

}  // namespace

TEST_CASE("density transform: half-alpha at zero, symmetry, monotone, tail") {
    Tensor beta = nn::constant({1, 1}, {std::log(std::expm1(0.1))});
    beta = nn::softplus(beta);
    double alpha = 1.0 / beta->value[0];
    auto sigma = [&](double s) {
        return sdf_to_density(nn::constant({1, 1}, {s}), beta)->value[0];
    };
    CHECK(sigma(0.0) == doctest::Approx(alpha / 2).epsilon(1e-10));
    nn::Rng rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double prev = sigma(-2.0);
    for (int i = 0; i < 1000; ++i) {
        double s = u(rng);
        CHECK(sigma(s) + sigma(-s) == doctest::Approx(alpha).epsilon(1e-9));
    }
    for (int i = 1; i <= 200; ++i) {
        double cur = sigma(-2.0 + i * 0.02);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
    // Deep outside the surface the density is (nearly) extinct.
    CHECK(sigma(10 * beta->value[0]) < alpha * 1e-4);
    CHECK(sigma(0.05) < sigma(-0.05));
}

TEST_CASE("accumulated weights stay in [0,1] for random rays") {
    model::Model m = tiny_model(2, true);
    Triplane planes = random_planes(m, 3);
    model::NoGradGuard guard(m);
    nn::Rng rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> origins, dirs;
    for (int i = 0; i < 64; ++i) {
        Vec3 o(2.0 * u(rng), 2.0 * u(rng), 2.0 * u(rng));
        Vec3 d = normalized(Vec3(u(rng), u(rng), u(rng) + 0.01));
        origins.push_back(o);
        dirs.push_back(d);
    }
    RenderOptions opt;
    opt.n_samples = 24;
    PredView pv = render_rays(m, planes, origins, dirs, opt);
    for (double w : pv.opacity->value) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0 + 1e-12);
    }
    for (double c : pv.rgb->value) {
        CHECK(c >= -1e-12);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("homogeneous medium matches the closed-form transmittance") {
    model::Model m = tiny_model(5, true);
    make_constant_sdf(m, -0.07);  // constant negative SDF -> constant density
    Triplane planes = random_planes(m, 6);
    model::NoGradGuard guard(m);
    double beta = m.beta()->value[0];
    double sigma = sdf_to_density(nn::constant({1, 1}, {-0.07}), m.beta())->value[0];
    double L = 1.3;
    RenderOptions opt;
    opt.n_samples = 48;
    opt.use_fixed_range = true;
    opt.t_near = 0.0;
    opt.t_far = L;
    PredView pv = render_rays(m, planes, {Vec3(0, 0, -3)}, {Vec3(0, 0, 1)}, opt);
    // Midpoint quadrature integrates from the first sample t0 = bin/2 to t_far,
    // so for constant sigma the computed opacity telescopes exactly to
    // 1 - exp(-sigma * (L - bin/2)).
    double bin = L / opt.n_samples;
    double exact = 1.0 - std::exp(-sigma * (L - 0.5 * bin));
    CHECK(pv.opacity->value[0] == doctest::Approx(exact).epsilon(1e-12));
    // In a saturated medium the half-bin truncation falls below 1e-6 and the
    // computed opacity matches the untruncated closed form 1 - exp(-sigma*L).
    opt.t_far = 3.0;
    PredView sat = render_rays(m, planes, {Vec3(0, 0, -3)}, {Vec3(0, 0, 1)}, opt);
    CHECK(std::fabs(sat.opacity->value[0] - (1.0 - std::exp(-sigma * 3.0))) < 1e-6);
    CHECK(beta == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("crop render equals the matching sub-rectangle of a full render") {
    model::Model m = tiny_model(7, true);
    Triplane planes = random_planes(m, 8);
    model::NoGradGuard guard(m);
    geom::Camera cam = geom::look_at_camera(Vec3(0.4, -0.6, 2.0), Vec3(0, 0, 0), 0.6, 8, 8);
    RenderOptions opt;
    opt.n_samples = 16;
    PredView full = render_view(m, planes, cam, CropRect{0, 0, 8, 8}, opt);
    PredView crop = render_view(m, planes, cam, CropRect{2, 3, 4, 3}, opt);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) {
            int fi = (r + 2) * 8 + (c + 3);
            int ci = r * 3 + c;
            for (int k = 0; k < 3; ++k)
                CHECK(crop.rgb->value[ci * 3 + k] == full.rgb->value[fi * 3 + k]);
            CHECK(crop.opacity->value[ci] == full.opacity->value[fi]);
            CHECK(crop.depth->value[ci] == full.depth->value[fi]);
        }
}

TEST_CASE("rays that miss the domain composite to the white background") {
    model::Model m = tiny_model(9, true);
    Triplane planes = random_planes(m, 10);
    model::NoGradGuard guard(m);
    RenderOptions opt;
    opt.n_samples = 16;
    opt.with_normals = true;
    // Pointing away from the unit cube entirely.
    PredView pv = render_rays(m, planes, {Vec3(0, 0, -3)}, {Vec3(0, 0, -1)}, opt);
    CHECK(pv.opacity->value[0] == 0.0);
    for (int k = 0; k < 3; ++k) {
        CHECK(pv.rgb->value[k] == 1.0);
        CHECK(pv.normal->value[k] == 0.0);
    }
}

TEST_CASE("stratified sampling is reproducible from the generator seed") {
    model::Model m = tiny_model(11, true);
    Triplane planes = random_planes(m, 12);
    model::NoGradGuard guard(m);
    geom::Camera cam = geom::look_at_camera(Vec3(0, 0.5, 2.1), Vec3(0, 0, 0), 0.6, 8, 8);
    RenderOptions opt;
    opt.n_samples = 12;
    opt.mode = SampleMode::StratifiedJitter;
    nn::Rng r1(99), r2(99), r3(100);
    opt.rng = &r1;
    PredView a = render_view(m, planes, cam, CropRect{0, 0, 8, 8}, opt);
    opt.rng = &r2;
    PredView b = render_view(m, planes, cam, CropRect{0, 0, 8, 8}, opt);
    opt.rng = &r3;
    PredView c = render_view(m, planes, cam, CropRect{0, 0, 8, 8}, opt);
    CHECK(a.rgb->value == b.rgb->value);
    CHECK(a.opacity->value == b.opacity->value);
    CHECK(a.rgb->value != c.rgb->value);
}

TEST_CASE("estimate_normal matches a direct finite difference of the field") {
    model::Model m = tiny_model(13, true);
    Triplane planes = random_planes(m, 14);
    model::NoGradGuard guard(m);
    Vec3 p(0.21, -0.33, 0.12);
    double h = 1e-3;
    Vec3 g(
        (decode_sdf_at(m, planes, p + Vec3(h, 0, 0)) - decode_sdf_at(m, planes, p - Vec3(h, 0, 0))),
        (decode_sdf_at(m, planes, p + Vec3(0, h, 0)) - decode_sdf_at(m, planes, p - Vec3(0, h, 0))),
        (decode_sdf_at(m, planes, p + Vec3(0, 0, h)) -
         decode_sdf_at(m, planes, p - Vec3(0, 0, h))));
    Vec3 expected = normalized(g);
    Vec3 n = estimate_normal(m, planes, p, h);
    CHECK(norm(n) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(n.x == doctest::Approx(expected.x).epsilon(1e-6));
    CHECK(n.y == doctest::Approx(expected.y).epsilon(1e-6));
    CHECK(n.z == doctest::Approx(expected.z).epsilon(1e-6));
}

TEST_CASE("rendering stays differentiable with respect to plane features") {
    model::Model m = tiny_model(15, true);
    Triplane planes = random_planes(m, 16);
    planes.xy->requires_grad = true;
    model::NoGradGuard guard(m);
    RenderOptions opt;
    opt.n_samples = 8;
    PredView pv = render_rays(m, planes, {Vec3(0, 0, -2)}, {Vec3(0, 0, 1)}, opt);
    Tensor loss = nn::mean_all(nn::square(pv.rgb));
    nn::backward(loss);
    REQUIRE(planes.xy->grad.size() == planes.xy->value.size());
    double gsum = 0;
    for (double g : planes.xy->grad) gsum += std::fabs(g);
    CHECK(gsum > 0.0);
}
