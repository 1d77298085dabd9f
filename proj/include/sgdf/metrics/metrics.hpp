#pragma once

#include <string>
#include <vector>

#include "sgdf/core/tensor.hpp"

namespace sgdf::metrics {

// PSNR in dB with peak 1. Identical images are reported as +infinity; the
// training loss floors MSE instead, this does not.
double psnr(const Image& a, const Image& b);

// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1=0.01, K2=0.03,
// peak 1), computed per channel and averaged. Requires images >= 11x11.
double ssim(const Image& a, const Image& b);

struct ImageMetrics {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<ImageMetrics> per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    void finalize();                 // recompute means from per_image
    std::string table() const;       // one row per image: id, psnr, ssim
    std::string csv() const;         // machine-readable, same columns
};

}  // namespace sgdf::metrics
