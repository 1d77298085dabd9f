#include "sgdf/metrics/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sgdf::metrics {

double psnr(const Image& a, const Image& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("psnr: shapes differ, " + a.shape().str() + " vs " +
                                    b.shape().str());
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * peak)^2
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> g(kWin * kWin);
        double sum = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double dy = y - kWin / 2;
                const double dx = x - kWin / 2;
                g[static_cast<std::size_t>(y * kWin + x)] =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                sum += g[static_cast<std::size_t>(y * kWin + x)];
            }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return w;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("ssim: shapes differ, " + a.shape().str() + " vs " +
                                    b.shape().str());
    const Shape s = a.shape();
    if (s.h < kWin || s.w < kWin)
        throw std::invalid_argument("ssim needs images of at least 11x11, got " + s.str());

    const auto& w = gaussian_window();
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < s.c; ++c) {
        for (int y0 = 0; y0 + kWin <= s.h; ++y0) {
            for (int x0 = 0; x0 + kWin <= s.w; ++x0) {
                double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int dy = 0; dy < kWin; ++dy)
                    for (int dx = 0; dx < kWin; ++dx) {
                        const double wv = w[static_cast<std::size_t>(dy * kWin + dx)];
                        const double xa = a.at(y0 + dy, x0 + dx, c);
                        const double xb = b.at(y0 + dy, x0 + dx, c);
                        mx += wv * xa;
                        my += wv * xb;
                        mxx += wv * xa * xa;
                        myy += wv * xb * xb;
                        mxy += wv * xa * xb;
                    }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cov = mxy - mx * my;
                const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
                const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

void MetricReport::finalize() {
    mean_psnr = 0.0;
    mean_ssim = 0.0;
    if (per_image.empty()) return;
    for (const auto& m : per_image) {
        mean_psnr += m.psnr;
        mean_ssim += m.ssim;
    }
    mean_psnr /= static_cast<double>(per_image.size());
    mean_ssim /= static_cast<double>(per_image.size());
}

std::string MetricReport::table() const {
    std::ostringstream os;
    os << "id\tpsnr_db\tssim\n";
    for (const auto& m : per_image) os << m.id << '\t' << m.psnr << '\t' << m.ssim << '\n';
    os << "mean\t" << mean_psnr << '\t' << mean_ssim << '\n';
    return os.str();
}

std::string MetricReport::csv() const {
    std::ostringstream os;
    os << "id,psnr_db,ssim\n";
    for (const auto& m : per_image) os << m.id << ',' << m.psnr << ',' << m.ssim << '\n';
    os << "mean," << mean_psnr << ',' << mean_ssim << '\n';
    return os.str();
}

}  // namespace sgdf::metrics
