#pragma once

#include <cstdint>

#include "sgdf/harness/dataset_spec.hpp"
#include "sgdf/metrics/metrics.hpp"
#include "sgdf/model/sgdformer.hpp"

namespace sgdf::harness {

// Evaluation noise protocol. alpha = 0 realizes the Gaussian-only column.
struct EvalSpec {
    double alpha = 0.0;
    double sigma = 0.2;
    int num_images = 8;
    std::uint64_t seed = 777;
};

// Degrades each pool image with a seed derived from (spec.seed, index), runs
// the model, clips to [0,1], and scores against the clean target. Passing
// nullptr scores the degraded input itself (identity model baseline); both
// paths see identical noise draws, so reports are directly comparable.
metrics::MetricReport evaluate(model::Sgdformer* m, const DatasetSpec& data,
                               const EvalSpec& spec);

}  // namespace sgdf::harness
