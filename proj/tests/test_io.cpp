#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "sgdf/data/image_io.hpp"
#include "sgdf/harness/trainer.hpp"
#include "sgdf/io/serialize.hpp"
#include "support/oracles.hpp"

using namespace sgdf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sgdf_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Tensor<float> random_tensor(Shape s, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    return oracles::random_tensor<float>(s, rng, lo, hi);
}

void randomize_model(model::Sgdformer& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-0.3, 0.3);
    for (int id = 0; id < m.params.size(); ++id)
        for (auto& v : m.params.value(id).vec()) v = static_cast<float>(uni(rng));
}

}  // namespace

TEST_CASE("tensor archive round trips tensors and metadata bitwise") {
    TempDir dir;
    io::TensorArchive a;
    a.meta["run"] = "unit";
    a.meta["step"] = 17;
    const Tensor<float> t1 = random_tensor(Shape{3, 5, 2}, 1);
    const Tensor<float> t2 = random_tensor(Shape{1, 1, 7}, 2);
    a.add("alpha", t1);
    a.add("beta.gamma", t2);
    CHECK_THROWS_AS(a.add("alpha", t1), std::invalid_argument);
    a.save(dir.file("arch.sgdf"));

    const io::TensorArchive b = io::TensorArchive::load(dir.file("arch.sgdf"));
    CHECK(b.meta.at("run") == "unit");
    CHECK(b.meta.at("step") == 17);
    REQUIRE(b.entries().size() == 2);
    CHECK(b.entries()[0].first == "alpha");  // registration order preserved
    CHECK(b.entries()[1].first == "beta.gamma");
    CHECK(b.has("alpha"));
    CHECK_FALSE(b.has("delta"));
    CHECK(max_abs_diff(b.get("alpha"), t1) == 0.0);
    CHECK(max_abs_diff(b.get("beta.gamma"), t2) == 0.0);
    CHECK_THROWS_AS(b.get("delta"), std::out_of_range);
}

TEST_CASE("archive loading rejects foreign and truncated files") {
    TempDir dir;
    {
        std::ofstream f(dir.file("not_an_archive.sgdf"), std::ios::binary);
        f << "PK\x03\x04 something else entirely";
    }
    CHECK_THROWS_AS(io::TensorArchive::load(dir.file("not_an_archive.sgdf")),
                    std::runtime_error);
    CHECK_THROWS_AS(io::TensorArchive::load(dir.file("missing.sgdf")), std::runtime_error);

    // flip one magic byte of a valid archive
    io::TensorArchive a;
    a.add("t", random_tensor(Shape{2, 2, 1}, 3));
    a.save(dir.file("good.sgdf"));
    {
        std::fstream f(dir.file("good.sgdf"),
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_AS(io::TensorArchive::load(dir.file("good.sgdf")), std::runtime_error);

    // truncate the payload of another valid archive
    a.save(dir.file("short.sgdf"));
    fs::resize_file(dir.file("short.sgdf"), fs::file_size(dir.file("short.sgdf")) - 4);
    CHECK_THROWS_AS(io::TensorArchive::load(dir.file("short.sgdf")), std::runtime_error);
}

TEST_CASE("archive files start with the documented magic") {
    TempDir dir;
    io::TensorArchive a;
    a.add("t", random_tensor(Shape{1, 1, 1}, 4));
    a.save(dir.file("magic.sgdf"));
    std::ifstream f(dir.file("magic.sgdf"), std::ios::binary);
    char head[6];
    f.read(head, 6);
    CHECK(std::string(head, 6) == "SGDF1\n");
}

TEST_CASE("checkpoints restore a model that behaves bitwise identically") {
    TempDir dir;
    model::ModelConfig cfg;
    cfg.channels = 4;
    cfg.max_disparity = 8;
    cfg.nsa_window = 3;
    cfg.num_blocks = 2;
    cfg.fusion.kind = model::FusionKind::attention;
    model::Sgdformer m = model::make_sgdformer(cfg, 9);
    randomize_model(m, 10);

    io::save_checkpoint(dir.file("model.sgdf"), m, {{"note", "round trip"}});
    model::Sgdformer r = io::load_checkpoint(dir.file("model.sgdf"));

    CHECK(r.config.config_hash() == cfg.config_hash());
    REQUIRE(r.params.size() == m.params.size());
    for (int id = 0; id < m.params.size(); ++id)
        CHECK(max_abs_diff(r.params.value(id), m.params.value(id)) == 0.0);

    const Image noisy = random_tensor(Shape{10, 14, 1}, 11, 0.0, 1.0);
    const Image guide = random_tensor(Shape{10, 14, 1}, 12, 0.0, 1.0);
    CHECK(max_abs_diff(model::denoise_channel(m, noisy, guide),
                       model::denoise_channel(r, noisy, guide)) == 0.0);

    const io::TensorArchive raw = io::TensorArchive::load(dir.file("model.sgdf"));
    CHECK(raw.meta.at("note") == "round trip");
    CHECK(raw.meta.contains("config"));

    // an archive without a config is not a checkpoint
    io::TensorArchive plain;
    plain.add("x", random_tensor(Shape{1, 1, 1}, 13));
    plain.save(dir.file("plain.sgdf"));
    CHECK_THROWS_AS(io::load_checkpoint(dir.file("plain.sgdf")), std::runtime_error);
}

TEST_CASE("optimizer state archives carry moments and step metadata") {
    TempDir dir;
    model::ModelConfig cfg;
    cfg.channels = 4;
    cfg.max_disparity = 8;
    cfg.nsa_window = 3;
    harness::TrainSchedule sched;
    sched.iterations = 1;
    sched.batch_size = 1;
    sched.patch_h = 16;
    sched.patch_w = 32;
    harness::DatasetSpec data;
    data.num_scenes = 2;
    data.height = 16;
    data.width = 32;
    data.max_disparity = 8;
    data.min_layers = 1;
    data.max_layers = 2;
    const harness::TrainResult run =
        harness::train(cfg, sched, data, 77, dir.file("run"));

    const io::TensorArchive a =
        io::TensorArchive::load(dir.file("run") + "/optimizer_state.sgdf");
    CHECK(a.meta.at("step") == 1);
    int first = 0, second = 0;
    for (const auto& [name, t] : a.entries()) {
        const bool is_m = name.rfind("m.", 0) == 0;
        const bool is_v = name.rfind("v.", 0) == 0;
        CHECK((is_m || is_v));
        first += is_m;
        second += is_v;
        // one step with nonzero gradients leaves nonzero second moments
        if (is_v && name == "v.head.w") {
            double mag = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) mag += std::abs(t[i]);
            CHECK(mag > 0.0);
        }
    }
    CHECK(first == run.model.params.size());
    CHECK(second == run.model.params.size());
    // moment tensors mirror checkpoint entries one to one
    const io::TensorArchive ckpt =
        io::TensorArchive::load(dir.file("run") + "/checkpoint_final.sgdf");
    for (const auto& [name, t] : ckpt.entries()) {
        CHECK(a.has("m." + name));
        CHECK(a.get("m." + name).shape() == t.shape());
    }
}

TEST_CASE("pnm images round trip at both bit depths") {
    TempDir dir;
    Image g(Shape{7, 5, 1});
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<float>(i) / static_cast<float>(g.size() - 1);
    data::write_pnm(dir.file("g.pgm"), g, 8);
    const Image g8 = data::read_pnm(dir.file("g.pgm"));
    REQUIRE(g8.shape() == g.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(g8[i] == doctest::Approx(g[i]).epsilon(0.5 / 255.0));

    data::write_pnm(dir.file("g16.pgm"), g, 16);
    const Image g16 = data::read_pnm(dir.file("g16.pgm"));
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(g16[i] == doctest::Approx(g[i]).epsilon(0.5 / 65535.0));

    Image rgb = random_tensor(Shape{6, 4, 3}, 31, 0.0, 1.0);
    data::write_pnm(dir.file("c.ppm"), rgb, 8);
    const Image c8 = data::read_pnm(dir.file("c.ppm"));
    REQUIRE(c8.shape() == rgb.shape());
    double max_err = 0.0;
    for (std::size_t i = 0; i < rgb.size(); ++i)
        max_err = std::max(max_err, std::abs(static_cast<double>(c8[i]) - rgb[i]));
    CHECK(max_err <= 0.5 / 255.0 + 1e-7);

    // out-of-range values are clipped at quantization time
    Image wild(Shape{2, 2, 1});
    wild[0] = -0.5f;
    wild[1] = 1.5f;
    wild[2] = 0.0f;
    wild[3] = 1.0f;
    data::write_pnm(dir.file("wild.pgm"), wild, 8);
    const Image clipped = data::read_pnm(dir.file("wild.pgm"));
    CHECK(clipped[0] == 0.0f);
    CHECK(clipped[1] == 1.0f);
    CHECK(clipped[2] == 0.0f);
    CHECK(clipped[3] == 1.0f);

    CHECK_THROWS_AS(data::write_pnm(dir.file("bad.pnm"), Image(Shape{2, 2, 2}), 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(data::read_pnm(dir.file("does_not_exist.pgm")), std::runtime_error);
}
