#include "sgdf/harness/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/ops.hpp"
#include "sgdf/core/rng.hpp"
#include "sgdf/data/dataset.hpp"
#include "sgdf/harness/adamw.hpp"
#include "sgdf/harness/evaluate.hpp"
#include "sgdf/io/serialize.hpp"
#include "sgdf/noise/noise_sim.hpp"

namespace sgdf::harness {

namespace fs = std::filesystem;

namespace {

Image take_channel(const Image& img, int c) {
    Image out(Shape{img.shape().h, img.shape().w, 1});
    for (int y = 0; y < img.shape().h; ++y)
        for (int x = 0; x < img.shape().w; ++x) out.at(y, x, 0) = img.at(y, x, c);
    return out;
}

struct BatchSample {
    Image noisy, guidance, clean;
    noise::NoiseParams np;
    int scene = 0;
};

void dump_batch(const std::string& dir, const std::vector<BatchSample>& batch, int iter,
                double loss) {
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["iteration"] = iter;
    meta["loss"] = loss;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = batch[b];
        data::ImagePair p;
        p.target = s.noisy;
        p.guidance = s.guidance;
        p.clean_target = s.clean;
        data::write_pair(dir, "sample" + std::to_string(b), p, data::FolderLayout{});
        meta["samples"].push_back({{"index", b},
                                   {"scene", s.scene},
                                   {"alpha", s.np.alpha},
                                   {"sigma", s.np.sigma},
                                   {"noise_seed", s.np.seed}});
    }
    std::ofstream f(dir + "/batch.json");
    f << meta.dump(2) << '\n';
}

std::string opt_state_name() { return "optimizer_state.sgdf"; }

void save_optimizer(const std::string& path, AdamW& opt, const ad::ParamStore<float>& params) {
    io::TensorArchive a;
    a.meta["step"] = opt.step_count();
    for (int id = 0; id < params.size(); ++id) {
        a.add("m." + params.name(id), opt.first_moments()[static_cast<std::size_t>(id)]);
        a.add("v." + params.name(id), opt.second_moments()[static_cast<std::size_t>(id)]);
    }
    a.save(path);
}

void load_optimizer(const std::string& path, AdamW& opt, const ad::ParamStore<float>& params) {
    const io::TensorArchive a = io::TensorArchive::load(path);
    opt.set_step_count(a.meta.at("step").get<std::int64_t>());
    for (int id = 0; id < params.size(); ++id) {
        opt.first_moments()[static_cast<std::size_t>(id)] = a.get("m." + params.name(id));
        opt.second_moments()[static_cast<std::size_t>(id)] = a.get("v." + params.name(id));
    }
}

TrainResult run_loop(RunManifest manifest, model::Sgdformer model, const std::string& out_dir,
                     bool load_opt_state, int stop_after = 0) {
    const TrainSchedule& sched = manifest.schedule;
    const DatasetSpec& data = manifest.dataset;
    const auto t_begin = std::chrono::steady_clock::now();
    if (manifest.started_at.empty()) manifest.started_at = iso_timestamp_now();

    AdamW opt(model.params, sched.beta1, sched.beta2, sched.weight_decay);
    if (load_opt_state) load_optimizer(out_dir + "/" + opt_state_name(), opt, model.params);

    std::vector<data::ImagePair> pool;
    pool.reserve(static_cast<std::size_t>(data.num_scenes));
    for (int i = 0; i < data.num_scenes; ++i)
        pool.push_back(data::synthesize_pair(scene_for(data, i)));

    DatasetSpec eval_data = held_out(data);
    EvalSpec eval_spec;
    eval_spec.alpha = 0.02;
    eval_spec.sigma = 0.2;
    eval_spec.num_images = 4;
    eval_spec.seed = core::derive_seed(manifest.seed, 0xEA11);

    const auto save_state = [&](const std::string& ckpt_name) {
        io::save_checkpoint(out_dir + "/" + ckpt_name, model,
                            {{"iteration", manifest.completed_iterations}});
        save_optimizer(out_dir + "/" + opt_state_name(), opt, model.params);
        bool known = false;
        for (const auto& c : manifest.checkpoints) known = known || c == ckpt_name;
        if (!known) manifest.checkpoints.push_back(ckpt_name);
        manifest.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                               t_begin)
                                     .count();
        manifest.finished_at = iso_timestamp_now();
        manifest.save(out_dir + "/manifest.json");
    };

    std::uniform_int_distribution<int> pick_scene(0, data.num_scenes - 1);
    std::uniform_int_distribution<int> pick_channel(0, data.channels - 1);
    const std::vector<int> pairing =
        model::resolve_pairing(model.config, data.channels, data.channels);

    for (int t = manifest.completed_iterations; t < sched.iterations; ++t) {
        const double lr = cosine_lr(t, sched.iterations, sched.lr_start, sched.lr_end);
        model.params.zero_grad();
        double loss_sum = 0.0;
        std::vector<BatchSample> batch;
        batch.reserve(static_cast<std::size_t>(sched.batch_size));

        for (int b = 0; b < sched.batch_size; ++b) {
            auto rng = core::make_engine(core::derive_seed(
                manifest.seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(b)));
            BatchSample s;
            s.scene = pick_scene(rng);
            const data::ImagePair patch =
                data::sample_patch(pool[static_cast<std::size_t>(s.scene)], sched.patch_h,
                                   sched.patch_w, rng);
            const int tc = data.channels > 1 ? pick_channel(rng) : 0;
            s.np = noise::sample_noise_params(rng);
            const Image noisy_full = noise::degrade(patch.target, s.np);
            s.noisy = take_channel(noisy_full, tc);
            s.guidance = data.self_guidance
                             ? s.noisy
                             : take_channel(patch.guidance, pairing[static_cast<std::size_t>(tc)]);
            s.clean = take_channel(patch.clean_target, tc);

            ad::Graph<float> g(&model.params);
            const int in_n = g.constant(s.noisy);
            const int in_g = g.constant(s.guidance);
            const int out = model::sgdformer_forward(g, model.ids, model.config, in_n, in_g);
            const int loss = ad::ops::psnr_loss(g, out, g.constant(s.clean));
            const double lv = g.val(loss)[0];
            loss_sum += lv;
            batch.push_back(std::move(s));

            if (!std::isfinite(lv)) {
                const std::string dir = out_dir + "/nan_batch_" + std::to_string(t);
                dump_batch(dir, batch, t, lv);
                manifest.save(out_dir + "/manifest.json");
                throw std::runtime_error("non-finite loss at iteration " + std::to_string(t) +
                                         "; offending batch dumped to " + dir);
            }
            g.backward(loss, 1.0f / static_cast<float>(sched.batch_size));
        }

        opt.step(lr);
        manifest.loss_history.push_back(loss_sum / sched.batch_size);
        manifest.lr_trace.push_back(lr);
        manifest.completed_iterations = t + 1;

        if (sched.eval_every > 0 &&
            ((t + 1) % sched.eval_every == 0 || t + 1 == sched.iterations)) {
            const metrics::MetricReport r = evaluate(&model, eval_data, eval_spec);
            manifest.metrics.push_back({t + 1, r.mean_psnr, r.mean_ssim});
        }
        if (sched.checkpoint_every > 0 && (t + 1) % sched.checkpoint_every == 0 &&
            t + 1 < sched.iterations)
            save_state("checkpoint_" + std::to_string(t + 1) + ".sgdf");
        if (stop_after > 0 && t + 1 >= stop_after && t + 1 < sched.iterations) {
            save_state("checkpoint_" + std::to_string(t + 1) + ".sgdf");
            return TrainResult{std::move(manifest), std::move(model)};
        }
    }

    save_state("checkpoint_final.sgdf");
    return TrainResult{std::move(manifest), std::move(model)};
}

}  // namespace

TrainResult train(const model::ModelConfig& cfg, const TrainSchedule& sched,
                  const DatasetSpec& data, std::uint64_t seed, const std::string& out_dir,
                  int stop_after) {
    cfg.validate();
    sched.validate();
    data.validate();
    if (sched.patch_h > data.height || sched.patch_w > data.width)
        throw std::invalid_argument("patch size exceeds scene size; shrink the patch or "
                                    "enlarge the dataset scenes");
    if (data.max_disparity > cfg.max_disparity)
        throw std::invalid_argument("dataset disparities exceed the model's max_disparity");
    fs::create_directories(out_dir);

    RunManifest manifest;
    manifest.config = cfg;
    manifest.schedule = sched;
    manifest.dataset = data;
    manifest.seed = seed;

    model::Sgdformer model =
        model::make_sgdformer(cfg, core::derive_seed(seed, 0x1417));
    return run_loop(std::move(manifest), std::move(model), out_dir, false, stop_after);
}

TrainResult resume(const std::string& manifest_path) {
    RunManifest manifest = RunManifest::load(manifest_path);
    const std::string out_dir = fs::path(manifest_path).parent_path().string();
    if (manifest.checkpoints.empty())
        throw std::runtime_error("manifest lists no checkpoint to resume from");

    model::Sgdformer model =
        io::load_checkpoint(out_dir + "/" + manifest.checkpoints.back());
    return run_loop(std::move(manifest), std::move(model), out_dir, true);
}

}  // namespace sgdf::harness
