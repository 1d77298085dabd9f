#include "sgdf/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sgdf/harness/manifest.hpp"
#include "sgdf/io/serialize.hpp"

namespace sgdf::harness {

namespace fs = std::filesystem;

namespace {

unsigned char to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
}

void write_pnm(const std::string& path, const Tensor<float>& img, int channels) {
    if (img.shape().c != channels)
        throw std::invalid_argument("raster expects " + std::to_string(channels) +
                                    " channels, got " + img.shape().str());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write raster: " + path);
    f << (channels == 1 ? "P5" : "P6") << '\n'
      << img.shape().w << ' ' << img.shape().h << "\n255\n";
    for (int y = 0; y < img.shape().h; ++y)
        for (int x = 0; x < img.shape().w; ++x)
            for (int c = 0; c < channels; ++c) {
                const unsigned char b = to_byte(img.at(y, x, c));
                f.write(reinterpret_cast<const char*>(&b), 1);
            }
}

void write_series_csv(const std::string& path, const std::string& ycol,
                      const std::vector<double>& ys) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write csv: " + path);
    f << "iteration," << ycol << '\n';
    for (std::size_t i = 0; i < ys.size(); ++i) f << i << ',' << ys[i] << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

void write_pgm(const std::string& path, const Tensor<float>& img) { write_pnm(path, img, 1); }
void write_ppm(const std::string& path, const Tensor<float>& img) { write_pnm(path, img, 3); }

Tensor<float> render_curve(const std::vector<double>& ys, int h, int w) {
    Tensor<float> canvas(Shape{h, w, 1});
    canvas.fill(1.0f);
    if (ys.empty()) return canvas;
    double lo = ys[0], hi = ys[0];
    for (const double y : ys) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    if (hi == lo) hi = lo + 1.0;
    const auto yrow = [&](double v) {
        const double t = (v - lo) / (hi - lo);
        return std::clamp(static_cast<int>(std::lround((1.0 - t) * (h - 1))), 0, h - 1);
    };
    const std::size_t n = ys.size();
    int prev = yrow(ys[0]);
    for (int x = 0; x < w; ++x) {
        const std::size_t i = n == 1 ? 0 : (static_cast<std::size_t>(x) * (n - 1)) / (w - 1);
        const int row = yrow(ys[i]);
        const int a = std::min(prev, row), b = std::max(prev, row);
        for (int y = a; y <= b; ++y) canvas.at(y, x, 0) = 0.0f;
        prev = row;
    }
    return canvas;
}

Tensor<float> render_heatmap(const Tensor<float>& grid) {
    if (grid.shape().c != 1)
        throw std::invalid_argument("heatmap expects 1 channel, got " + grid.shape().str());
    Tensor<float> out(grid.shape());
    const float lo = grid.min();
    const float hi = grid.max();
    const float span = hi > lo ? hi - lo : 1.0f;
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = (grid[i] - lo) / span;
    return out;
}

Tensor<float> render_attention_row(const Tensor<float>& volume, int row) {
    const Shape s = volume.shape();
    if (row < 0 || row >= s.h)
        throw std::invalid_argument("attention row " + std::to_string(row) + " outside height " +
                                    std::to_string(s.h));
    Tensor<float> grid(Shape{s.w, s.c, 1});
    for (int w = 0; w < s.w; ++w)
        for (int d = 0; d < s.c; ++d) grid.at(w, d, 0) = volume.at(row, w, d);
    return render_heatmap(grid);
}

Tensor<float> render_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                             int h, int w) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("scatter needs matching coordinate lists");
    Tensor<float> canvas(Shape{h, w, 1});
    canvas.fill(1.0f);
    if (xs.empty()) return canvas;
    double xlo = xs[0], xhi = xs[0], ylo = ys[0], yhi = ys[0];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xlo = std::min(xlo, xs[i]);
        xhi = std::max(xhi, xs[i]);
        ylo = std::min(ylo, ys[i]);
        yhi = std::max(yhi, ys[i]);
    }
    if (xhi == xlo) xhi = xlo + 1.0;
    if (yhi == ylo) yhi = ylo + 1.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int cx = std::clamp(
            static_cast<int>(std::lround((xs[i] - xlo) / (xhi - xlo) * (w - 5))) + 2, 2, w - 3);
        const int cy = std::clamp(
            static_cast<int>(std::lround((1.0 - (ys[i] - ylo) / (yhi - ylo)) * (h - 5))) + 2, 2,
            h - 3);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) canvas.at(cy + dy, cx + dx, 0) = 0.0f;
    }
    return canvas;
}

std::vector<std::string> emit_plots(const std::string& input_path, const std::string& out_dir) {
    std::ifstream f(input_path);
    if (!f) throw std::runtime_error("cannot read plot input: " + input_path);
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string content = buf.str();
    fs::create_directories(out_dir);
    std::vector<std::string> skipped;

    nlohmann::json j = nlohmann::json::parse(content, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
        const auto series = [&](const char* key, const std::vector<double>& ys,
                                const std::string& name) {
            if (ys.empty()) {
                skipped.push_back(name + " (manifest has no " + std::string(key) + ")");
                return;
            }
            write_series_csv(out_dir + "/" + name + ".csv", name, ys);
            write_pgm(out_dir + "/" + name + ".pgm", render_curve(ys));
        };
        const auto loss = j.value("loss_history", std::vector<double>{});
        const auto lrs = j.value("lr_trace", std::vector<double>{});
        series("loss_history", loss, "loss_curve");
        series("lr_trace", lrs, "lr_trace");

        std::vector<double> psnrs;
        if (j.contains("metrics"))
            for (const auto& rec : j.at("metrics")) psnrs.push_back(rec.value("psnr", 0.0));
        if (psnrs.empty())
            skipped.push_back("metric_trace (manifest has no metrics)");
        else {
            write_series_csv(out_dir + "/metric_trace.csv", "psnr_db", psnrs);
            write_pgm(out_dir + "/metric_trace.pgm", render_curve(psnrs));
        }
        return skipped;
    }

    // CSV table mode: scatter of psnr vs parameter count.
    std::stringstream ss(content);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("empty plot input: " + input_path);
    const std::vector<std::string> header = split_csv_line(line);
    int params_col = -1, psnr_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "params") params_col = static_cast<int>(i);
        if (header[i] == "psnr_db") psnr_col = static_cast<int>(i);
    }
    if (params_col < 0 || psnr_col < 0) {
        skipped.push_back("scatter (input lacks params/psnr_db columns)");
        return skipped;
    }
    std::vector<double> xs, ys;
    std::ofstream sc(out_dir + "/scatter.csv");
    sc << "params,psnr_db\n";
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) <= std::max(params_col, psnr_col)) continue;
        try {
            const double x = std::stod(cells[static_cast<std::size_t>(params_col)]);
            const double y = std::stod(cells[static_cast<std::size_t>(psnr_col)]);
            xs.push_back(x);
            ys.push_back(y);
            sc << x << ',' << y << '\n';
        } catch (const std::exception&) {
            skipped.push_back("scatter row (unparseable): " + line);
        }
    }
    write_pgm(out_dir + "/scatter.pgm", render_scatter(xs, ys));
    return skipped;
}

std::vector<std::string> emit_attention_plots(const std::string& archive_path,
                                              const std::string& out_dir, int row) {
    const io::TensorArchive a = io::TensorArchive::load(archive_path);
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& [name, t] : a.entries()) {
        std::string file = name;
        for (auto& ch : file)
            if (ch == '/' || ch == '.') ch = '_';
        const int r = row < 0 ? t.shape().h / 2 : row;
        const std::string path = out_dir + "/" + file + ".pgm";
        write_pgm(path, render_attention_row(t, r));
        written.push_back(path);
    }
    return written;
}

}  // namespace sgdf::harness
