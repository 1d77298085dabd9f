#pragma once

#include <cstdint>
#include <string>

#include "sgdf/harness/manifest.hpp"
#include "sgdf/model/sgdformer.hpp"

namespace sgdf::harness {

struct TrainResult {
    RunManifest manifest;
    model::Sgdformer model;
};

// Runs the schedule from scratch; writes checkpoints, optimizer state, and
// manifest.json under out_dir. Per-sample batches resample noise parameters
// from streams derived from (seed, iteration, sample), so runs are
// reproducible and resumable. A non-finite loss aborts after dumping the
// offending batch to out_dir/nan_batch_<iter>/. A positive stop_after ends
// the invocation after that many iterations with a resumable checkpoint on
// disk, simulating preemption; the manifest keeps the full schedule.
TrainResult train(const model::ModelConfig& cfg, const TrainSchedule& sched,
                  const DatasetSpec& data, std::uint64_t seed, const std::string& out_dir,
                  int stop_after = 0);

// Continues an interrupted run from its manifest + last checkpoint +
// optimizer state. The completed prefix of loss_history is kept; the
// remaining iterations reproduce what the uninterrupted run would have done.
TrainResult resume(const std::string& manifest_path);

}  // namespace sgdf::harness
