#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdf/harness/dataset_spec.hpp"
#include "sgdf/harness/evaluate.hpp"
#include "sgdf/harness/schedule.hpp"
#include "sgdf/model/config.hpp"

namespace sgdf::harness {

// The seven studied axes: guidance on/off, encoder block type, transformer
// block components, attention propagation strategy, fusion strategy, NSA
// window size, and transformer block count.
enum class AblationAxis {
    guidance,
    encoder_block,
    components,
    propagation,
    fusion,
    nsa_window,
    block_count,
};

std::string to_string(AblationAxis a);
AblationAxis ablation_axis_from_string(const std::string& s);

struct AblationSpec {
    AblationAxis axis = AblationAxis::fusion;
    std::vector<std::string> values;
    model::ModelConfig base;
    TrainSchedule schedule;
    DatasetSpec dataset;
    EvalSpec eval;  // ablations score under Poisson-Gaussian noise
    std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct AblationRow {
    std::string axis;
    std::string value;
    std::uint64_t seed = 0;
    std::size_t param_count = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    bool failed = false;
    std::string error;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    std::string csv() const;
    std::string text() const;
    // Mean PSNR over non-failed rows of one value; NaN when none finished.
    double mean_psnr(const std::string& value) const;
};

// Applies one axis value to the run inputs. Values per axis:
//   guidance:       on | off           (off feeds the noisy target as guidance)
//   encoder_block:  naf | res
//   components:     vanilla+add | nrca+add | vanilla+svff | full
//   propagation:    nsa | conv
//   fusion:         svff | add | concat | attention
//   nsa_window:     3 | 5 | 7
//   block_count:    1 | 2 | 3 | 4
void apply_axis_value(model::ModelConfig& cfg, DatasetSpec& data, AblationAxis axis,
                      const std::string& value);

// Trains and evaluates every (value, seed) cell; a failed run becomes a
// failed row and the grid continues. Run artifacts land under out_dir.
AblationTable run_ablation(const AblationSpec& spec, const std::string& out_dir);

// Desk-scale presets covering all seven axes, one spec per axis.
std::vector<AblationSpec> ablation_presets();

}  // namespace sgdf::harness
