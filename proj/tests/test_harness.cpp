#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sgdf/harness/adamw.hpp"
#include "sgdf/harness/evaluate.hpp"
#include "sgdf/harness/trainer.hpp"
#include "sgdf/io/serialize.hpp"

using namespace sgdf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sgdf_harness_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string dir(const std::string& name) const { return (path / name).string(); }
};

model::ModelConfig desk_cfg() {
    model::ModelConfig cfg;
    cfg.channels = 4;
    cfg.max_disparity = 8;
    cfg.nsa_window = 3;
    return cfg;
}

harness::TrainSchedule desk_sched(int iterations) {
    harness::TrainSchedule s;
    s.iterations = iterations;
    s.batch_size = 2;
    s.patch_h = 16;
    s.patch_w = 32;
    return s;
}

harness::DatasetSpec desk_data() {
    harness::DatasetSpec d;
    d.num_scenes = 3;
    d.height = 32;
    d.width = 48;
    d.max_disparity = 8;
    d.min_layers = 1;
    d.max_layers = 3;
    d.seed = 515;
    return d;
}

}  // namespace

TEST_CASE("cosine schedule hits the endpoints exactly and never increases") {
    const double s = 5e-4, e = 1e-6;
    const int total = 101;
    CHECK(harness::cosine_lr(0, total, s, e) == s);
    CHECK(harness::cosine_lr(total - 1, total, s, e) == e);
    CHECK(harness::cosine_lr(50, total, s, e) == doctest::Approx((s + e) / 2).epsilon(1e-12));
    double prev = s;
    for (int t = 0; t < total; ++t) {
        const double lr = harness::cosine_lr(t, total, s, e);
        CHECK(lr <= prev);
        CHECK(lr >= e);
        CHECK(lr <= s);
        prev = lr;
    }
    // degenerate totals collapse to the starting rate
    CHECK(harness::cosine_lr(0, 1, s, e) == s);
    CHECK(harness::cosine_lr(5, 1, s, e) == s);
}

TEST_CASE("adamw reproduces the reference update rule") {
    ad::ParamStore<float> store;
    Tensor<float> w(Shape{1, 1, 3});
    w[0] = 1.0f;
    w[1] = -2.0f;
    w[2] = 0.5f;
    const int id = store.add("w", w);
    const double g0[3] = {0.1, -0.2, 0.05};

    const double beta1 = 0.9, beta2 = 0.99, wd = 0.01, eps = 1e-8, lr = 1e-3;
    harness::AdamW opt(store, beta1, beta2, wd, eps);
    for (int i = 0; i < 3; ++i) store.grad(id)[i] = static_cast<float>(g0[i]);
    opt.step(lr);
    CHECK(opt.step_count() == 1);

    for (int i = 0; i < 3; ++i) {
        const double m = (1 - beta1) * g0[i];
        const double v = (1 - beta2) * g0[i] * g0[i];
        const double mhat = m / (1 - beta1);  // t = 1
        const double vhat = v / (1 - beta2);
        const double expect = w[i] - lr * (mhat / (std::sqrt(vhat) + eps) + wd * w[i]);
        CHECK(store.value(id)[i] == doctest::Approx(expect).epsilon(1e-6));
    }

    // second step with fresh gradients; moments must carry over
    const double w1[3] = {store.value(id)[0], store.value(id)[1], store.value(id)[2]};
    const double g1[3] = {-0.05, 0.1, 0.2};
    for (int i = 0; i < 3; ++i) store.grad(id)[i] = static_cast<float>(g1[i]);
    opt.step(lr);
    CHECK(opt.step_count() == 2);
    for (int i = 0; i < 3; ++i) {
        const double m1 = (1 - beta1) * g0[i];
        const double v1 = (1 - beta2) * g0[i] * g0[i];
        // the stored moments were rounded to float after step one
        const double m2 = beta1 * static_cast<float>(m1) + (1 - beta1) * g1[i];
        const double v2 = beta2 * static_cast<float>(v1) + (1 - beta2) * g1[i] * g1[i];
        const double mhat = m2 / (1 - beta1 * beta1);
        const double vhat = v2 / (1 - beta2 * beta2);
        const double expect = w1[i] - lr * (mhat / (std::sqrt(vhat) + eps) + wd * w1[i]);
        CHECK(store.value(id)[i] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("schedule and dataset validation") {
    harness::TrainSchedule s;
    CHECK_NOTHROW(s.validate());
    CHECK_NOTHROW(harness::TrainSchedule::toy().validate());

    auto bad_sched = [](auto mutate) {
        harness::TrainSchedule t;
        mutate(t);
        return t;
    };
    CHECK_THROWS_AS(bad_sched([](auto& t) { t.lr_start = t.lr_end; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_sched([](auto& t) { t.lr_end = 0.0; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_sched([](auto& t) { t.iterations = 0; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_sched([](auto& t) { t.batch_size = 0; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_sched([](auto& t) { t.patch_w = 30; }).validate(),
                    std::invalid_argument);

    auto bad_data = [](auto mutate) {
        harness::DatasetSpec d;
        mutate(d);
        return d;
    };
    CHECK_NOTHROW(harness::DatasetSpec{}.validate());
    CHECK_THROWS_AS(bad_data([](auto& d) { d.num_scenes = 0; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_data([](auto& d) { d.height = 30; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_data([](auto& d) { d.width = 12; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_data([](auto& d) { d.channels = 2; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(bad_data([](auto& d) { d.max_layers = 0; }).validate(),
                    std::invalid_argument);

    // trainer-level cross checks
    TempDir tmp;
    harness::DatasetSpec data = desk_data();
    harness::TrainSchedule big = desk_sched(1);
    big.patch_h = 64;  // exceeds the 32-pixel scenes
    CHECK_THROWS_AS(harness::train(desk_cfg(), big, data, 1, tmp.dir("x")),
                    std::invalid_argument);
    harness::DatasetSpec deep = desk_data();
    deep.max_disparity = 16;  // exceeds the model's 8 bins
    CHECK_THROWS_AS(harness::train(desk_cfg(), desk_sched(1), deep, 1, tmp.dir("y")),
                    std::invalid_argument);
}

TEST_CASE("scene derivation is deterministic with a disjoint held-out stream") {
    const harness::DatasetSpec spec = desk_data();
    for (int i = 0; i < 6; ++i) {
        const data::SceneSpec a = scene_for(spec, i);
        const data::SceneSpec b = scene_for(spec, i);
        CHECK(a.seed == b.seed);
        CHECK(a.layer_disparities == b.layer_disparities);
        CHECK(a.height == spec.height);
        CHECK(a.channels == spec.channels);
        CHECK(a.max_disparity == spec.max_disparity);
        for (const int d : a.layer_disparities) {
            CHECK(d >= 0);
            CHECK(d < spec.max_disparity);
        }
        const int n = static_cast<int>(a.layer_disparities.size());
        CHECK(n >= spec.min_layers);
        CHECK(n <= spec.max_layers);
    }
    CHECK(scene_for(spec, 0).seed != scene_for(spec, 1).seed);

    const harness::DatasetSpec held = harness::held_out(spec);
    CHECK(held.seed != spec.seed);
    CHECK(held.num_scenes == spec.num_scenes);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(scene_for(held, i).seed != scene_for(spec, j).seed);
}

TEST_CASE("run manifest json round trip") {
    TempDir tmp;
    harness::RunManifest m;
    m.config = desk_cfg();
    m.schedule = desk_sched(7);
    m.dataset = desk_data();
    m.seed = 987654321;
    m.completed_iterations = 3;
    m.loss_history = {-10.5, -11.25, -12.0};
    m.lr_trace = {5e-4, 4e-4, 3e-4};
    m.metrics.push_back({2, 21.5, 0.81});
    m.checkpoints = {"checkpoint_2.sgdf", "checkpoint_final.sgdf"};
    m.started_at = "2026-01-02T03:04:05Z";
    m.finished_at = "2026-01-02T03:09:05Z";
    m.wall_seconds = 300.0;
    m.save(tmp.dir("manifest.json"));

    const harness::RunManifest r = harness::RunManifest::load(tmp.dir("manifest.json"));
    CHECK(r.config.config_hash() == m.config.config_hash());
    CHECK(r.schedule.iterations == 7);
    CHECK(r.dataset.seed == m.dataset.seed);
    CHECK(r.seed == m.seed);
    CHECK(r.completed_iterations == 3);
    CHECK(r.loss_history == m.loss_history);
    CHECK(r.lr_trace == m.lr_trace);
    REQUIRE(r.metrics.size() == 1);
    CHECK(r.metrics[0].iteration == 2);
    CHECK(r.metrics[0].psnr == 21.5);
    CHECK(r.checkpoints == m.checkpoints);
    CHECK(r.started_at == m.started_at);
    CHECK(r.wall_seconds == 300.0);
}

TEST_CASE("training is bitwise reproducible across runs with one seed") {
    TempDir tmp;
    const auto cfg = desk_cfg();
    const auto sched = desk_sched(3);
    const auto data = desk_data();
    const harness::TrainResult a = harness::train(cfg, sched, data, 99, tmp.dir("a"));
    const harness::TrainResult b = harness::train(cfg, sched, data, 99, tmp.dir("b"));
    const harness::TrainResult c = harness::train(cfg, sched, data, 100, tmp.dir("c"));

    REQUIRE(a.manifest.loss_history.size() == 3);
    CHECK(a.manifest.loss_history == b.manifest.loss_history);  // exact double equality
    CHECK(a.manifest.lr_trace == b.manifest.lr_trace);
    CHECK(a.manifest.loss_history != c.manifest.loss_history);

    REQUIRE(a.model.params.size() == b.model.params.size());
    for (int id = 0; id < a.model.params.size(); ++id)
        CHECK(max_abs_diff(a.model.params.value(id), b.model.params.value(id)) == 0.0);

    // loss starts near the identity baseline: the network is the identity at
    // init, so the first entries must be finite and in a plausible psnr range
    for (const double l : a.manifest.loss_history) {
        CHECK(std::isfinite(l));
        CHECK(l < 0.0);   // negative psnr in dB: loss = -psnr
        CHECK(l > -60.0);
    }
}

TEST_CASE("an interrupted run resumed from disk matches the uninterrupted run") {
    TempDir tmp;
    const auto cfg = desk_cfg();
    const auto data = desk_data();
    const int total = 4, cut = 2;

    harness::TrainSchedule full = desk_sched(total);
    const harness::TrainResult single = harness::train(cfg, full, data, 321, tmp.dir("one"));

    // preempt after `cut` iterations; the manifest keeps the full schedule
    harness::train(cfg, full, data, 321, tmp.dir("two"), cut);
    const std::string mpath = tmp.dir("two") + "/manifest.json";
    {
        const harness::RunManifest head = harness::RunManifest::load(mpath);
        CHECK(head.completed_iterations == cut);
        CHECK(head.schedule.iterations == total);
        CHECK(head.loss_history.size() == static_cast<std::size_t>(cut));
        REQUIRE_FALSE(head.checkpoints.empty());
    }

    const harness::TrainResult resumed = harness::resume(mpath);
    CHECK(resumed.manifest.completed_iterations == total);
    REQUIRE(resumed.manifest.loss_history.size() == single.manifest.loss_history.size());
    CHECK(resumed.manifest.loss_history == single.manifest.loss_history);
    CHECK(resumed.manifest.lr_trace == single.manifest.lr_trace);
    for (int id = 0; id < single.model.params.size(); ++id)
        CHECK(max_abs_diff(resumed.model.params.value(id), single.model.params.value(id)) ==
              0.0);
}

TEST_CASE("a non-finite loss aborts the run and dumps the offending batch") {
    TempDir tmp;
    const auto cfg = desk_cfg();
    harness::TrainSchedule sched = desk_sched(1);
    sched.batch_size = 1;
    const auto data = desk_data();
    harness::train(cfg, sched, data, 555, tmp.dir("run"));

    // extend the schedule, then poison the checkpoint the resume will load
    const std::string mpath = tmp.dir("run") + "/manifest.json";
    nlohmann::json j;
    {
        std::ifstream in(mpath);
        in >> j;
    }
    j["schedule"]["iterations"] = 2;
    {
        std::ofstream out(mpath);
        out << j.dump(2) << '\n';
    }
    const std::string cpath = tmp.dir("run") + "/checkpoint_final.sgdf";
    const io::TensorArchive loaded = io::TensorArchive::load(cpath);
    io::TensorArchive poisoned;
    poisoned.meta = loaded.meta;
    for (const auto& [name, t] : loaded.entries()) {
        Tensor<float> copy = t;
        if (name == "target_stream.intro.w")
            copy[0] = std::numeric_limits<float>::quiet_NaN();
        poisoned.add(name, copy);
    }
    poisoned.save(cpath);

    CHECK_THROWS_AS(harness::resume(mpath), std::runtime_error);
    const std::string dump = tmp.dir("run") + "/nan_batch_1";
    REQUIRE(fs::exists(dump + "/batch.json"));
    nlohmann::json meta;
    {
        std::ifstream in(dump + "/batch.json");
        in >> meta;
    }
    CHECK(meta.at("iteration") == 1);
    // json has no literal for non-finite doubles; they serialize as null
    const auto& loss = meta.at("loss");
    CHECK((loss.is_null() || !std::isfinite(loss.get<double>())));
    REQUIRE(meta.at("samples").size() == 1);
    CHECK(fs::exists(dump + "/sample0_target.pgm"));
    CHECK(fs::exists(dump + "/sample0_guide.pgm"));
    CHECK(fs::exists(dump + "/sample0_clean.pgm"));
}

TEST_CASE("evaluation is deterministic and scores the identity baseline sanely") {
    const harness::DatasetSpec data = desk_data();
    harness::EvalSpec spec;
    spec.alpha = 0.0;
    spec.sigma = 0.2;
    spec.num_images = 4;
    spec.seed = 31337;

    const metrics::MetricReport a = harness::evaluate(nullptr, data, spec);
    const metrics::MetricReport b = harness::evaluate(nullptr, data, spec);
    REQUIRE(a.per_image.size() == 4);
    CHECK(a.mean_psnr == b.mean_psnr);
    CHECK(a.mean_ssim == b.mean_ssim);
    for (std::size_t i = 0; i < a.per_image.size(); ++i) {
        CHECK(a.per_image[i].psnr == b.per_image[i].psnr);
        CHECK(a.per_image[i].id == "synth" + std::to_string(i));
    }

    // sigma 0.2 after clipping lands in a narrow, predictable psnr band
    CHECK(a.mean_psnr > 11.0);
    CHECK(a.mean_psnr < 17.0);
    CHECK(a.mean_ssim > 0.0);
    CHECK(a.mean_ssim < 0.9);

    // a fresh model is the identity, so it must score exactly like the baseline
    model::Sgdformer m = model::make_sgdformer(desk_cfg(), 2);
    const metrics::MetricReport c = harness::evaluate(&m, data, spec);
    for (std::size_t i = 0; i < a.per_image.size(); ++i) {
        CHECK(c.per_image[i].psnr == a.per_image[i].psnr);
        CHECK(c.per_image[i].ssim == a.per_image[i].ssim);
    }

    // lighter noise scores strictly better under the identity baseline
    harness::EvalSpec lighter = spec;
    lighter.sigma = 0.05;
    CHECK(harness::evaluate(nullptr, data, lighter).mean_psnr > a.mean_psnr);
}
