#pragma once

#include <string>
#include <vector>

#include "sgdf/core/tensor.hpp"

namespace sgdf::harness {

// 8-bit binary PNM writers; values clipped to [0,1]. write_pgm takes 1
// channel, write_ppm takes 3.
void write_pgm(const std::string& path, const Tensor<float>& img);
void write_ppm(const std::string& path, const Tensor<float>& img);

// Line plot of ys over a white canvas, one x column per point bucket.
Tensor<float> render_curve(const std::vector<double>& ys, int h = 256, int w = 512);

// Min-max normalized grayscale view of a 1-channel grid.
Tensor<float> render_heatmap(const Tensor<float>& grid);

// One image row of an attention volume as a (W x D) heatmap: y = image
// column, x = disparity bin.
Tensor<float> render_attention_row(const Tensor<float>& volume, int row);

// Scatter of (x, y) points with 3x3 markers; axes scaled to the data range.
Tensor<float> render_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                             int h = 256, int w = 256);

// Reads a run manifest (JSON) or an ablation table (CSV) and writes the
// plots it supports: loss curve, lr trace, and metric trace for manifests;
// PSNR-vs-parameters scatter for tables. Every emitted file also gets a
// plain-CSV data twin. Returns the items skipped for missing fields.
std::vector<std::string> emit_plots(const std::string& input_path, const std::string& out_dir);

// Renders every tensor of a SGDF1 archive as attention-row heatmaps for the
// given image row (middle row when negative).
std::vector<std::string> emit_attention_plots(const std::string& archive_path,
                                              const std::string& out_dir, int row = -1);

}  // namespace sgdf::harness
