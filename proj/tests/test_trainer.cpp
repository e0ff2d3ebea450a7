#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/train/trainer.hpp"

using namespace refcolor;
using namespace refcolor::train;

namespace {

TrainConfig tiny_config(std::uint64_t seed, const char* precision) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.precision = precision;
    cfg.image_size = 32;
    cfg.batch = 2;
    cfg.enc_channels = {4, 8, 16};
    cfg.embed_channels = {8, 8, 16, 16, 16};
    cfg.disc_channels = {8, 16, 16, 16};
    cfg.temporal_enc_channels = {8, 16, 32};
    cfg.temporal_dec_channels = {16, 8};
    cfg.temporal_disc_channels = {8, 16, 16, 16};
    cfg.pyramid_channels = {4, 8, 16, 32, 64};
    cfg.steps_color = 4;
    cfg.steps_temporal = 3;
    cfg.steps_finetune = 2;
    return cfg;
}

std::vector<data::Sequence> tiny_dataset(int n, std::uint64_t seed) {
    std::vector<data::Sequence> seqs;
    data::SynthOpts so;
    so.n_frames = 9;
    so.size = 32;
    for (int i = 0; i < n; ++i) seqs.push_back(data::synth_sequence(seed + static_cast<std::uint64_t>(i), so));
    return seqs;
}

std::vector<StepLog> run_color(TrainConfig cfg, const std::vector<data::Sequence>& seqs) {
    TrainerState state = TrainerState::init(cfg);
    std::vector<StepLog> logs;
    train_color_stage(state, seqs, [&](const StepLog& l) { logs.push_back(l); });
    return logs;
}

std::vector<double> store_values(const ParamStore& store) {
    std::vector<double> out;
    for (const auto* p : store.all()) {
        auto v = p->tensor.to_vector();
        out.insert(out.end(), v.begin(), v.end());
        if (p->spectral_u.defined()) {
            auto u = p->spectral_u.to_vector();
            out.insert(out.end(), u.begin(), u.end());
        }
    }
    return out;
}

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("seeded color stage is bitwise deterministic at 64-bit") {
    auto seqs = tiny_dataset(2, 500);
    auto a = run_color(tiny_config(7, "f64"), seqs);
    auto b = run_color(tiny_config(7, "f64"), seqs);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].total == b[i].total);
        CHECK(a[i].l1 == b[i].l1);
        CHECK(a[i].gan_d == b[i].gan_d);
    }
    auto c = run_color(tiny_config(8, "f64"), seqs);
    CHECK(a[0].total != c[0].total); // different seed, different trajectory
}

TEST_CASE("color stage rejects bad datasets") {
    TrainerState state = TrainerState::init(tiny_config(1, "f32"));
    std::vector<data::Sequence> empty;
    CHECK_THROWS_AS(train_color_stage(state, empty), std::invalid_argument);

    auto seqs = tiny_dataset(1, 600);
    seqs[0].frames.resize(7);
    CHECK_THROWS_AS(train_color_stage(state, seqs), std::invalid_argument);
}

TEST_CASE("temporal stage requires a completed color stage and freezes it") {
    auto seqs = tiny_dataset(2, 700);
    TrainConfig cfg = tiny_config(9, "f64");
    TrainerState state = TrainerState::init(cfg);
    CHECK_THROWS_AS(train_temporal_stage(state, seqs), std::invalid_argument);

    train_color_stage(state, seqs);
    const auto before = store_values(state.bundle.color->params());
    train_temporal_stage(state, seqs);
    const auto after = store_values(state.bundle.color->params());
    CHECK(before == after); // frozen byte-for-byte
    CHECK(state.stage_done == 2);
}

TEST_CASE("checkpoint round trip is byte-identical") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "refcolor_ckpt_test";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.ckpt").string();
    const std::string p2 = (dir / "b.ckpt").string();

    auto seqs = tiny_dataset(2, 800);
    TrainerState state = TrainerState::init(tiny_config(11, "f32"));
    train_color_stage(state, seqs);
    save_checkpoint(p1, state);
    TrainerState loaded = load_checkpoint(p1);
    save_checkpoint(p2, loaded);
    CHECK(file_bytes(p1) == file_bytes(p2));
    fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects truncation and wrong magic") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "refcolor_ckpt_err";
    fs::create_directories(dir);
    const std::string path = (dir / "t.ckpt").string();
    TrainerState state = TrainerState::init(tiny_config(12, "f32"));
    save_checkpoint(path, state);

    auto bytes = file_bytes(path);
    {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    {
        std::ofstream os(path, std::ios::binary);
        std::string junk = "NOTACKPT";
        os.write(junk.data(), 8);
        os.write(bytes.data() + 8, static_cast<std::streamsize>(bytes.size() - 8));
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("cross-config parameter restore reports shape mismatch") {
    TrainerState tiny = TrainerState::init(tiny_config(13, "f32"));
    std::vector<ParamBlob> blobs;
    ParamBlob b;
    b.name = "g.enl.conv1.weight";
    b.dtype = DType::F32;
    b.shape = {64, 1, 3, 3}; // full-size kernel against the tiny model
    b.values.assign(64 * 9, 0.0);
    blobs.push_back(std::move(b));
    CHECK_THROWS_WITH_AS(restore_params(tiny.bundle.color->params(), blobs, "test"),
                         doctest::Contains("shape mismatch"), std::runtime_error);
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "refcolor_resume_test";
    fs::create_directories(dir);
    const std::string path = (dir / "mid.ckpt").string();
    auto seqs = tiny_dataset(2, 900);

    // Uninterrupted: 6 steps.
    TrainConfig cfg = tiny_config(17, "f64");
    cfg.steps_color = 6;
    std::vector<StepLog> full;
    {
        TrainerState state = TrainerState::init(cfg);
        train_color_stage(state, seqs, [&](const StepLog& l) { full.push_back(l); });
    }

    // Interrupted at 3, checkpointed, resumed for 3 more.
    std::vector<StepLog> stitched;
    {
        TrainConfig first = cfg;
        first.steps_color = 3;
        TrainerState state = TrainerState::init(first);
        train_color_stage(state, seqs, [&](const StepLog& l) { stitched.push_back(l); });
        save_checkpoint(path, state);
    }
    {
        TrainerState state = load_checkpoint(path);
        state.bundle.cfg.steps_color = 3;
        train_color_stage(state, seqs, [&](const StepLog& l) { stitched.push_back(l); });
    }
    REQUIRE(full.size() == stitched.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(full[i].step == stitched[i].step);
        CHECK(full[i].total == stitched[i].total);
        CHECK(full[i].l1 == stitched[i].l1);
        CHECK(full[i].gan_g == stitched[i].gan_g);
    }
    fs::remove_all(dir);
}

TEST_CASE("fine_tune validates inputs and stays deterministic") {
    auto seqs = tiny_dataset(2, 1000);
    TrainConfig cfg = tiny_config(19, "f64");
    TrainerState state = TrainerState::init(cfg);
    std::vector<data::Sequence> empty;
    CHECK_THROWS_AS(fine_tune(state, empty), std::invalid_argument);
    CHECK_THROWS_AS(fine_tune(state, seqs), std::invalid_argument); // no trained checkpoint yet

    auto run = [&](std::uint64_t seed) {
        TrainerState s = TrainerState::init(tiny_config(seed, "f64"));
        train_color_stage(s, seqs);
        train_temporal_stage(s, seqs);
        std::vector<StepLog> logs;
        fine_tune(s, seqs, [&](const StepLog& l) { logs.push_back(l); });
        return logs;
    };
    auto a = run(21);
    auto b = run(21);
    REQUIRE(a.size() == b.size());
    REQUIRE(!a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].total == b[i].total);
}

TEST_CASE("non-finite loss raises a numeric error with the failing step") {
    auto seqs = tiny_dataset(1, 1100);
    TrainerState state = TrainerState::init(tiny_config(23, "f32"));
    // Poison the decoder output bias; tanh propagates the NaN to the loss.
    Parameter* p = state.bundle.color->params().find("g.dec.conv4.bias");
    REQUIRE(p != nullptr);
    auto d = p->tensor.data<float>();
    d[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        train_color_stage(state, seqs);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.step == 1);
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("adam learning rates follow the config split") {
    TrainConfig cfg = tiny_config(29, "f32");
    TrainerState state = TrainerState::init(cfg);
    CHECK(state.opt_color_g.opts().lr == cfg.lr_g);
    CHECK(state.opt_color_d.opts().lr == cfg.lr_d);
    CHECK(state.opt_color_g.opts().beta1 == 0.5);
    CHECK(state.opt_color_g.opts().beta2 == 0.999);
    CHECK(cfg.lr_g == 1e-4);
    CHECK(cfg.lr_d == 1e-5);
}

TEST_CASE("config file round trip preserves every field") {
    TrainConfig cfg = tiny_config(31, "f64");
    cfg.dataset = "some/manifest.txt";
    cfg.weights.style = 123.5;
    const std::string text = cfg.serialize();
    TrainConfig back = TrainConfig::parse(text);
    CHECK(back.serialize() == text);
    CHECK(back.weights.style == 123.5);
    CHECK(back.precision == "f64");
    CHECK(back.enc_channels == cfg.enc_channels);

    CHECK_THROWS_AS(TrainConfig::parse("nonsense_key=1\n"), std::invalid_argument);
}
