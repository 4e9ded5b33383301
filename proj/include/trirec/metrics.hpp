#pragma once

#include <string>
#include <vector>

namespace trirec::metrics {

// Images are flat row-major arrays with `channels` interleaved values per
// pixel, in [0,1].
struct Image {
    int height = 0, width = 0, channels = 0;
    std::vector<double> data;
};

// 10*log10(1/MSE), capped at 99 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);
// PSNR restricted to pixels with select[i] != 0 (per-pixel selector).
double psnr_masked(const Image& a, const Image& b, const std::vector<uint8_t>& select);

// Windowed SSIM: channel-mean grayscale, 11x11 Gaussian window sigma 1.5,
// K1=0.01, K2=0.03, dynamic range 1.
double ssim(const Image& a, const Image& b);

struct ViewMetrics {
    double psnr = 0;
    double ssim = 0;
    double psnr_masked = 0;    // over flagged-patch pixels (nan-free: 99 if empty)
    double psnr_unmasked = 0;  // over the complement
};

struct EvalReport {
    double psnr = 0;
    double ssim = 0;
    double psnr_masked = 0;
    double psnr_unmasked = 0;
    std::vector<ViewMetrics> per_view;

    void accumulate();  // fills the means from per_view
    std::string table() const;
    std::string csv() const;
};

}  // namespace trirec::metrics
