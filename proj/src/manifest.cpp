#include "sgdf/harness/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace sgdf::harness {

void to_json(nlohmann::json& j, const TrainSchedule& s) {
    j = nlohmann::json{{"lr_start", s.lr_start},
                       {"lr_end", s.lr_end},
                       {"beta1", s.beta1},
                       {"beta2", s.beta2},
                       {"weight_decay", s.weight_decay},
                       {"batch_size", s.batch_size},
                       {"patch_h", s.patch_h},
                       {"patch_w", s.patch_w},
                       {"iterations", s.iterations},
                       {"checkpoint_every", s.checkpoint_every},
                       {"eval_every", s.eval_every}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
    TrainSchedule d;
    s.lr_start = j.value("lr_start", d.lr_start);
    s.lr_end = j.value("lr_end", d.lr_end);
    s.beta1 = j.value("beta1", d.beta1);
    s.beta2 = j.value("beta2", d.beta2);
    s.weight_decay = j.value("weight_decay", d.weight_decay);
    s.batch_size = j.value("batch_size", d.batch_size);
    s.patch_h = j.value("patch_h", d.patch_h);
    s.patch_w = j.value("patch_w", d.patch_w);
    s.iterations = j.value("iterations", d.iterations);
    s.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    s.eval_every = j.value("eval_every", d.eval_every);
}

void to_json(nlohmann::json& j, const MetricRecord& r) {
    j = nlohmann::json{{"iteration", r.iteration}, {"psnr", r.psnr}, {"ssim", r.ssim}};
}

void from_json(const nlohmann::json& j, MetricRecord& r) {
    r.iteration = j.at("iteration").get<int>();
    r.psnr = j.at("psnr").get<double>();
    r.ssim = j.at("ssim").get<double>();
}

void to_json(nlohmann::json& j, const RunManifest& m) {
    j = nlohmann::json{{"config", m.config},
                       {"schedule", m.schedule},
                       {"dataset", m.dataset},
                       {"seed", m.seed},
                       {"completed_iterations", m.completed_iterations},
                       {"loss_history", m.loss_history},
                       {"lr_trace", m.lr_trace},
                       {"metrics", m.metrics},
                       {"checkpoints", m.checkpoints},
                       {"started_at", m.started_at},
                       {"finished_at", m.finished_at},
                       {"wall_seconds", m.wall_seconds}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
    m.config = j.at("config").get<model::ModelConfig>();
    m.schedule = j.at("schedule").get<TrainSchedule>();
    m.dataset = j.at("dataset").get<DatasetSpec>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.completed_iterations = j.value("completed_iterations", 0);
    m.loss_history = j.value("loss_history", std::vector<double>{});
    m.lr_trace = j.value("lr_trace", std::vector<double>{});
    m.metrics = j.value("metrics", std::vector<MetricRecord>{});
    m.checkpoints = j.value("checkpoints", std::vector<std::string>{});
    m.started_at = j.value("started_at", std::string{});
    m.finished_at = j.value("finished_at", std::string{});
    m.wall_seconds = j.value("wall_seconds", 0.0);
}

void RunManifest::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << nlohmann::json(*this).dump(2) << '\n';
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read manifest: " + path);
    nlohmann::json j;
    f >> j;
    return j.get<RunManifest>();
}

std::string iso_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace sgdf::harness
