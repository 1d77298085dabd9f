#pragma once

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sgdf::harness {

// Optimizer and sampling protocol for one run. Paper-scale defaults; toy()
// shrinks the patch and iteration count to desk scale.
struct TrainSchedule {
    double lr_start = 5e-4;
    double lr_end = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.0;
    int batch_size = 8;
    int patch_h = 128;
    int patch_w = 400;
    int iterations = 200000;
    int checkpoint_every = 0;  // 0: final checkpoint only
    int eval_every = 0;        // 0: no held-out metric records during training

    void validate() const {
        if (!(lr_start > lr_end && lr_end > 0.0))
            throw std::invalid_argument("schedule requires lr_start > lr_end > 0");
        if (iterations < 1) throw std::invalid_argument("schedule requires iterations >= 1");
        if (batch_size < 1) throw std::invalid_argument("schedule requires batch_size >= 1");
        if (patch_h < 4 || patch_w < 4 || patch_h % 4 || patch_w % 4)
            throw std::invalid_argument("patch dims must be positive multiples of 4");
    }

    static TrainSchedule toy() {
        TrainSchedule s;
        s.iterations = 2000;
        s.patch_h = 64;
        s.patch_w = 128;
        s.batch_size = 2;
        return s;
    }
};

// Cosine decay with exact endpoints: lr(0) = start, lr(T-1) = end, monotone
// non-increasing in between.
inline double cosine_lr(int t, int total, double lr_start, double lr_end) {
    if (total <= 1 || t <= 0) return lr_start;
    if (t >= total - 1) return lr_end;
    const double phase = M_PI * static_cast<double>(t) / static_cast<double>(total - 1);
    return lr_end + (lr_start - lr_end) * 0.5 * (1.0 + std::cos(phase));
}

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

}  // namespace sgdf::harness
