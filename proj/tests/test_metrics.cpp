#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "trirec/metrics.hpp"

using namespace trirec::metrics;

namespace {

Image random_image(int h, int w, int ch, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image im{h, w, ch, {}};
    im.data.resize(static_cast<size_t>(h) * w * ch);
    for (double& v : im.data) v = u(rng);
    return im;
}

}  // namespace

TEST_CASE("psnr: identical images cap at 99, uniform offsets are exact") {
    Image a = random_image(16, 16, 3, 1);
    CHECK(psnr(a, a) == doctest::Approx(99.0));
    Image b = a;
    for (double& v : b.data) v += 0.1;  // MSE 0.01 -> 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(b, a) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
}

TEST_CASE("psnr matches the naive definition") {
    Image a = random_image(12, 9, 3, 2);
    Image b = random_image(12, 9, 3, 3);
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));
}

TEST_CASE("masked psnr partitions into selected and complement pixels") {
    int h = 8, w = 8;
    Image a = random_image(h, w, 3, 4);
    Image b = a;
    std::vector<uint8_t> sel(static_cast<size_t>(h) * w, 0);
    // Corrupt only the selected half; the complement stays perfect.
    for (int i = 0; i < h * w; ++i) sel[i] = (i % 2 == 0) ? 1 : 0;
    double corrupt_mse = 0;
    int corrupt_n = 0;
    for (int i = 0; i < h * w; ++i) {
        if (!sel[i]) continue;
        for (int k = 0; k < 3; ++k) {
            double before = b.data[static_cast<size_t>(i) * 3 + k];
            double after = std::min(1.0, before + 0.3);
            b.data[static_cast<size_t>(i) * 3 + k] = after;
            corrupt_mse += (after - before) * (after - before);
            ++corrupt_n;
        }
    }
    corrupt_mse /= corrupt_n;
    CHECK(psnr_masked(a, b, sel) ==
          doctest::Approx(10.0 * std::log10(1.0 / corrupt_mse)).epsilon(1e-9));
    std::vector<uint8_t> inv(sel.size());
    for (size_t i = 0; i < sel.size(); ++i) inv[i] = sel[i] ? 0 : 1;
    CHECK(psnr_masked(a, b, inv) == doctest::Approx(99.0));
    // Empty selector: defined as the 99 dB cap rather than NaN.
    CHECK(psnr_masked(a, b, std::vector<uint8_t>(sel.size(), 0)) == doctest::Approx(99.0));
}

TEST_CASE("ssim basics: self-similarity, symmetry, and ordering") {
    Image a = random_image(24, 24, 3, 5);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));
    Image slight = a;
    for (double& v : slight.data) v = std::min(1.0, v + 0.02);
    Image heavy = a;
    for (size_t i = 0; i < heavy.data.size(); ++i) heavy.data[i] = 1.0 - heavy.data[i];
    double s_slight = ssim(a, slight);
    double s_heavy = ssim(a, heavy);
    CHECK(s_slight > s_heavy);
    CHECK(s_slight > 0.9);
    CHECK(s_heavy < 0.5);
    CHECK(ssim(a, slight) == doctest::Approx(ssim(slight, a)).epsilon(1e-12));
    CHECK(s_slight <= 1.0 + 1e-12);
    CHECK(s_heavy >= -1.0 - 1e-12);
}

TEST_CASE("ssim of constant images follows the stabilised closed form") {
    // For two constant images the covariance terms vanish:
    // ssim = (2*mu_a*mu_b + C1) / (mu_a^2 + mu_b^2 + C1)  (variance factor = 1).
    Image a{16, 16, 1, std::vector<double>(256, 0.25)};
    Image b{16, 16, 1, std::vector<double>(256, 0.75)};
    double c1 = 0.01 * 0.01;
    double expected = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("EvalReport aggregates per-view means and renders tables") {
    EvalReport rep;
    rep.per_view.push_back({30.0, 0.9, 28.0, 32.0});
    rep.per_view.push_back({20.0, 0.7, 18.0, 22.0});
    rep.accumulate();
    CHECK(rep.psnr == doctest::Approx(25.0));
    CHECK(rep.ssim == doctest::Approx(0.8));
    CHECK(rep.psnr_masked == doctest::Approx(23.0));
    CHECK(rep.psnr_unmasked == doctest::Approx(27.0));
    std::string t = rep.table();
    CHECK(t.find("psnr") != std::string::npos);
    std::string c = rep.csv();
    CHECK(c.find(',') != std::string::npos);
    // One header plus one line per view.
    CHECK(std::count(c.begin(), c.end(), '\n') >= 3);
}
