#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgdf/harness/dataset_spec.hpp"
#include "sgdf/harness/schedule.hpp"
#include "sgdf/model/config.hpp"

namespace sgdf::harness {

struct MetricRecord {
    int iteration = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// Everything needed to audit or restart a run: a restart from the manifest
// plus its last checkpoint continues with the correct lr and iteration
// counter, and reproduces the remaining batches of an uninterrupted run.
struct RunManifest {
    model::ModelConfig config;
    TrainSchedule schedule;
    DatasetSpec dataset;
    std::uint64_t seed = 0;
    int completed_iterations = 0;
    std::vector<double> loss_history;  // one entry per completed iteration
    std::vector<double> lr_trace;
    std::vector<MetricRecord> metrics;
    std::vector<std::string> checkpoints;  // paths relative to the manifest
    std::string started_at;
    std::string finished_at;
    double wall_seconds = 0.0;

    void save(const std::string& path) const;  // pretty-printed JSON
    static RunManifest load(const std::string& path);
};

void to_json(nlohmann::json& j, const MetricRecord& r);
void from_json(const nlohmann::json& j, MetricRecord& r);
void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

std::string iso_timestamp_now();

}  // namespace sgdf::harness
