#include "trirec/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace trirec::metrics {

static void check_match(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw std::invalid_argument("metrics: image shape mismatch");
    if (a.data.size() != static_cast<size_t>(a.height) * a.width * a.channels ||
        b.data.size() != a.data.size())
        throw std::invalid_argument("metrics: image data size mismatch");
}

static double mse_to_psnr(double mse) {
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

double psnr(const Image& a, const Image& b) {
    check_match(a, b);
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    return mse_to_psnr(mse);
}

double psnr_masked(const Image& a, const Image& b, const std::vector<uint8_t>& select) {
    check_match(a, b);
    if (select.size() != static_cast<size_t>(a.height) * a.width)
        throw std::invalid_argument("psnr_masked: selector size mismatch");
    double mse = 0;
    size_t count = 0;
    for (size_t p = 0; p < select.size(); ++p) {
        if (!select[p]) continue;
        for (int k = 0; k < a.channels; ++k) {
            double d = a.data[p * a.channels + k] - b.data[p * a.channels + k];
            mse += d * d;
        }
        ++count;
    }
    if (count == 0) return 99.0;
    mse /= static_cast<double>(count * a.channels);
    return mse_to_psnr(mse);
}

static std::vector<double> to_gray(const Image& im) {
    size_t n = static_cast<size_t>(im.height) * im.width;
    std::vector<double> g(n, 0.0);
    for (size_t p = 0; p < n; ++p) {
        double s = 0;
        for (int k = 0; k < im.channels; ++k) s += im.data[p * im.channels + k];
        g[p] = s / im.channels;
    }
    return g;
}

double ssim(const Image& a, const Image& b) {
    check_match(a, b);
    constexpr int win = 11;
    constexpr double sigma = 1.5, k1 = 0.01, k2 = 0.03, L = 1.0;
    if (a.height < win || a.width < win) throw std::invalid_argument("ssim: image smaller than window");
    const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);

    double kernel[win][win];
    double ksum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            double dy = i - win / 2, dx = j - win / 2;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    std::vector<double> ga = to_gray(a), gb = to_gray(b);
    int H = a.height, W = a.width;
    double acc = 0;
    int count = 0;
    for (int r = 0; r + win <= H; ++r)
        for (int c = 0; c + win <= W; ++c) {
            double mua = 0, mub = 0, vaa = 0, vbb = 0, vab = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    double va = ga[static_cast<size_t>(r + i) * W + c + j];
                    double vb = gb[static_cast<size_t>(r + i) * W + c + j];
                    double kw = kernel[i][j];
                    mua += kw * va;
                    mub += kw * vb;
                    vaa += kw * va * va;
                    vbb += kw * vb * vb;
                    vab += kw * va * vb;
                }
            vaa -= mua * mua;
            vbb -= mub * mub;
            vab -= mua * mub;
            double num = (2 * mua * mub + c1) * (2 * vab + c2);
            double den = (mua * mua + mub * mub + c1) * (vaa + vbb + c2);
            acc += num / den;
            ++count;
        }
    return acc / count;
}

void EvalReport::accumulate() {
    psnr = ssim = psnr_masked = psnr_unmasked = 0;
    if (per_view.empty()) return;
    for (const auto& v : per_view) {
        psnr += v.psnr;
        ssim += v.ssim;
        psnr_masked += v.psnr_masked;
        psnr_unmasked += v.psnr_unmasked;
    }
    double n = static_cast<double>(per_view.size());
    psnr /= n;
    ssim /= n;
    psnr_masked /= n;
    psnr_unmasked /= n;
}

std::string EvalReport::table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "view      psnr      ssim    psnr_masked  psnr_unmasked\n";
    for (size_t i = 0; i < per_view.size(); ++i) {
        const auto& v = per_view[i];
        os << i << "        " << v.psnr << "    " << v.ssim << "    " << v.psnr_masked
           << "       " << v.psnr_unmasked << "\n";
    }
    os << "mean     " << psnr << "    " << ssim << "    " << psnr_masked << "       "
       << psnr_unmasked << "\n";
    return os.str();
}

std::string EvalReport::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "view,psnr,ssim,psnr_masked,psnr_unmasked\n";
    for (size_t i = 0; i < per_view.size(); ++i) {
        const auto& v = per_view[i];
        os << i << "," << v.psnr << "," << v.ssim << "," << v.psnr_masked << ","
           << v.psnr_unmasked << "\n";
    }
    os << "mean," << psnr << "," << ssim << "," << psnr_masked << "," << psnr_unmasked << "\n";
    return os.str();
}

}  // namespace trirec::metrics
