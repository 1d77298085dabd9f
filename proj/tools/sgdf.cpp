#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sgdf/data/dataset.hpp"
#include "sgdf/harness/ablation.hpp"
#include "sgdf/harness/evaluate.hpp"
#include "sgdf/harness/plots.hpp"
#include "sgdf/harness/trainer.hpp"
#include "sgdf/io/serialize.hpp"
#include "sgdf/model/sgdformer.hpp"

namespace fs = std::filesystem;
using namespace sgdf;

namespace {

model::ModelConfig load_config(const std::string& path, const std::string& preset) {
    model::ModelConfig cfg;
    if (preset == "toy") cfg = model::ModelConfig::toy();
    else if (preset == "ablation") cfg = model::ModelConfig::ablation();
    else if (preset == "paper") cfg = model::ModelConfig{};
    else throw CLI::ValidationError("--preset", "unknown preset: " + preset);
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw CLI::ValidationError("--config", "cannot read " + path);
        nlohmann::json j;
        f >> j;
        cfg = j.get<model::ModelConfig>();
    }
    return cfg;
}

std::string run_dir(const std::string& out_root, const model::ModelConfig& cfg) {
    std::string stamp = harness::iso_timestamp_now();
    for (auto& c : stamp)
        if (c == ':') c = '-';
    return out_root + "/" + stamp + "_" + cfg.config_hash();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SGDFormer: stereo guided denoising trainer and tools"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, preset = "toy", out_root = "runs";
    std::uint64_t seed = 1;
    app.add_option("--config", config_path, "model config JSON file");
    app.add_option("--preset", preset, "config preset: toy | ablation | paper");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--out", out_root, "output root directory");

    auto* tr = app.add_subcommand("train", "train a model on synthetic stereo pairs");
    int iterations = 0, batch = 0, eval_every = 0, checkpoint_every = 0;
    std::string fusion;
    int blocks = 0;
    tr->add_option("--iterations", iterations, "override schedule length");
    tr->add_option("--batch", batch, "override batch size");
    tr->add_option("--fusion", fusion, "fusion strategy: svff | add | concat | attention");
    tr->add_option("--blocks", blocks, "transformer block count (L)");
    tr->add_option("--eval-every", eval_every, "held-out metric cadence (iterations)");
    tr->add_option("--checkpoint-every", checkpoint_every, "intermediate checkpoint cadence");

    auto* rs = app.add_subcommand("resume", "continue an interrupted run");
    std::string manifest_path;
    rs->add_option("manifest", manifest_path, "path to manifest.json")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on synthetic pairs");
    std::string ckpt_path;
    double alpha = 0.0, sigma = 0.2;
    int num_images = 8;
    bool identity = false;
    ev->add_option("checkpoint", ckpt_path, "checkpoint path (omit with --identity)");
    ev->add_option("--alpha", alpha, "Poisson component scale");
    ev->add_option("--sigma", sigma, "Gaussian component sigma");
    ev->add_option("--images", num_images, "held-out image count");
    ev->add_flag("--identity", identity, "score the noisy input itself");

    auto* ab = app.add_subcommand("ablate", "run one ablation axis over the study grid");
    std::string axis = "fusion";
    int ab_iterations = 0;
    ab->add_option("--axis", axis,
                   "guidance | encoder_block | components | propagation | fusion | "
                   "nsa_window | block_count");
    ab->add_option("--iterations", ab_iterations, "override per-run schedule length");

    auto* pl = app.add_subcommand("plot", "render plots from a manifest or ablation CSV");
    std::string plot_input, attention_archive;
    int attn_row = -1;
    pl->add_option("input", plot_input, "manifest.json or ablation CSV");
    pl->add_option("--attention", attention_archive, "attention-volume archive to render");
    pl->add_option("--row", attn_row, "image row for attention heatmaps");

    auto* sy = app.add_subcommand("synth-data", "write synthetic pairs to a folder");
    int num_pairs = 4;
    sy->add_option("--pairs", num_pairs, "number of scenes to write");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tr->parsed()) {
            model::ModelConfig cfg = load_config(config_path, preset);
            if (!fusion.empty()) cfg.fusion.kind = model::fusion_kind_from_string(fusion);
            if (blocks > 0) cfg.num_blocks = blocks;
            harness::TrainSchedule sched = harness::TrainSchedule::toy();
            if (iterations > 0) sched.iterations = iterations;
            if (batch > 0) sched.batch_size = batch;
            sched.eval_every = eval_every;
            sched.checkpoint_every = checkpoint_every;
            harness::DatasetSpec data;
            data.max_disparity = std::min(data.max_disparity, cfg.max_disparity);
            const std::string dir = run_dir(out_root, cfg);
            std::cout << "run dir: " << dir << "\n";
            const harness::TrainResult res = harness::train(cfg, sched, data, seed, dir);
            std::cout << "final loss: " << res.manifest.loss_history.back() << "\n";
        } else if (rs->parsed()) {
            const harness::TrainResult res = harness::resume(manifest_path);
            std::cout << "completed " << res.manifest.completed_iterations << " iterations\n";
        } else if (ev->parsed()) {
            harness::DatasetSpec data;
            data.seed = core::derive_seed(seed, 0x9E1D);
            harness::EvalSpec spec;
            spec.alpha = alpha;
            spec.sigma = sigma;
            spec.num_images = num_images;
            spec.seed = seed;
            metrics::MetricReport rep;
            if (identity) {
                rep = harness::evaluate(nullptr, data, spec);
            } else {
                if (ckpt_path.empty())
                    throw std::runtime_error("eval needs a checkpoint or --identity");
                model::Sgdformer m = io::load_checkpoint(ckpt_path);
                data.max_disparity = std::min(data.max_disparity, m.config.max_disparity);
                rep = harness::evaluate(&m, data, spec);
            }
            std::cout << rep.table();
        } else if (ab->parsed()) {
            harness::AblationSpec spec;
            bool found = false;
            for (auto& p : harness::ablation_presets())
                if (to_string(p.axis) == axis) {
                    spec = p;
                    found = true;
                }
            if (!found) throw std::runtime_error("unknown ablation axis: " + axis);
            if (ab_iterations > 0) spec.schedule.iterations = ab_iterations;
            spec.base = load_config(config_path, preset == "toy" ? "ablation" : preset);
            spec.dataset.max_disparity =
                std::min(spec.dataset.max_disparity, spec.base.max_disparity / 2);
            const std::string dir = run_dir(out_root, spec.base) + "_ablate_" + axis;
            const harness::AblationTable table = harness::run_ablation(spec, dir);
            fs::create_directories(dir);
            std::ofstream csv(dir + "/ablation.csv");
            csv << table.csv();
            std::cout << table.text();
            std::cout << "table: " << dir << "/ablation.csv\n";
        } else if (pl->parsed()) {
            const std::string dir = out_root + "/plots";
            if (!plot_input.empty()) {
                const auto skipped = harness::emit_plots(plot_input, dir);
                for (const auto& s : skipped) std::cout << "skipped: " << s << "\n";
            }
            if (!attention_archive.empty()) {
                const auto written =
                    harness::emit_attention_plots(attention_archive, dir, attn_row);
                for (const auto& w : written) std::cout << "wrote: " << w << "\n";
            }
            if (plot_input.empty() && attention_archive.empty())
                throw std::runtime_error("plot needs an input file or --attention archive");
        } else if (sy->parsed()) {
            harness::DatasetSpec data;
            data.seed = seed;
            const std::string dir = out_root + "/synth";
            fs::create_directories(dir);
            for (int i = 0; i < num_pairs; ++i) {
                const data::ImagePair pair = data::synthesize_pair(scene_for(data, i));
                data::write_pair(dir, "pair" + std::to_string(i), pair, data::FolderLayout{});
            }
            std::cout << "wrote " << num_pairs << " pairs to " << dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
