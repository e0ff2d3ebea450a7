#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/data/dataset.hpp"

namespace fs = std::filesystem;
using namespace refcolor;

namespace {

const char* kCli = REFCOLOR_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string out_file = (fs::temp_directory_path() / "refcolor_cli_out.txt").string();
    const std::string cmd = std::string(kCli) + " " + args + " > " + out_file + " 2>&1";
    const int rc = std::system(cmd.c_str());
    std::ifstream is(out_file);
    std::stringstream ss;
    ss << is.rdbuf();
    return {WEXITSTATUS(rc), ss.str()};
}

fs::path fresh_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Order-independent content hash of a directory tree.
std::size_t tree_hash(const fs::path& root) {
    std::map<std::string, std::size_t> entries;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream is(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        entries[fs::relative(e.path(), root).string()] = std::hash<std::string>{}(ss.str());
    }
    std::size_t acc = 1469598103934665603ULL;
    for (const auto& [k, v] : entries) {
        acc ^= std::hash<std::string>{}(k) + v;
        acc *= 1099511628211ULL;
    }
    return acc;
}

std::string tiny_overrides() {
    return "--set image_size=32 --set batch=2 --set enc_channels=4,8,16 "
           "--set embed_channels=8,8,16,16,16 --set disc_channels=8,16,16,16 "
           "--set temporal_enc_channels=8,16,32 --set temporal_dec_channels=16,8 "
           "--set temporal_disc_channels=8,16,16,16 --set pyramid_channels=4,8,16,32,64 ";
}

} // namespace

TEST_CASE("synth is deterministic and honors count/frames") {
    const auto d1 = fresh_dir("refcolor_cli_synth1");
    const auto d2 = fresh_dir("refcolor_cli_synth2");
    auto r1 = run_cli("synth --seed 5 --count 4 --frames 12 --size 32 --out " + d1.string());
    REQUIRE(r1.exit_code == 0);
    auto r2 = run_cli("synth --seed 5 --count 4 --frames 12 --size 32 --out " + d2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(tree_hash(d1) == tree_hash(d2));

    int seq_dirs = 0;
    for (const auto& e : fs::directory_iterator(d1))
        if (e.is_directory()) {
            ++seq_dirs;
            int frames = 0;
            for (const auto& f : fs::directory_iterator(e))
                if (f.path().filename().string().rfind("frame_", 0) == 0) ++frames;
            CHECK(frames == 12);
        }
    CHECK(seq_dirs == 4);

    auto r3 = run_cli("synth --seed 6 --count 4 --frames 12 --size 32 --out " + d1.string());
    REQUIRE(r3.exit_code == 0);
    CHECK(tree_hash(d1) != tree_hash(d2)); // different seed, different tree
}

TEST_CASE("synth rejects unwritable output with exit code 2") {
    auto r = run_cli("synth --seed 1 --count 1 --frames 8 --size 32 --out /proc/refcolor_nowrite");
    CHECK(r.exit_code == 2);
    CHECK(!r.output.empty());
}

TEST_CASE("shots splits the fixture video and is idempotent") {
    // Two-palette fixture with in-shot jitter (see dataprep tests for the
    // histogram arithmetic; 128 px recolored per frame -> MSE 128).
    const auto frames_dir = fresh_dir("refcolor_cli_frames");
    const int S = 256;
    for (int i = 0; i < 20; ++i) {
        const bool second = i >= 10;
        data::Image img(S, S, 3);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                const bool left = x < S / 2;
                img.at(y, x, 0) = second ? (left ? 0.85f : 0.3f) : (left ? 0.2f : 0.6f);
                img.at(y, x, 1) = second ? (left ? 0.75f : 0.6f) : (left ? 0.35f : 0.5f);
                img.at(y, x, 2) = second ? (left ? 0.3f : 0.8f) : (left ? 0.7f : 0.2f);
            }
        const int local = second ? i - 10 : i;
        for (int k = 0; k < local; ++k) {
            const float v = static_cast<float>((40 + 3 * k + (second ? 90 : 0)) / 255.0);
            for (int x = 0; x < S / 2; ++x)
                for (int c = 0; c < 3; ++c) img.at(k, x, c) = v;
        }
        char name[32];
        std::snprintf(name, sizeof(name), "f_%04d.png", i);
        data::write_png((frames_dir / name).string(), img);
    }

    const auto out1 = fresh_dir("refcolor_cli_shots1");
    auto r = run_cli("shots --video-frames-dir " + frames_dir.string() + " --out " + out1.string());
    REQUIRE(r.exit_code == 0);
    data::Manifest m = data::load_manifest((out1 / "manifest.txt").string());
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].frames == 10);
    CHECK(m.entries[1].frames == 10);

    const auto out2 = fresh_dir("refcolor_cli_shots2");
    auto r2 = run_cli("shots --video-frames-dir " + frames_dir.string() + " --out " + out2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(tree_hash(out1) == tree_hash(out2)); // pure function of inputs
}

TEST_CASE("shots with an empty directory exits 2") {
    const auto dir = fresh_dir("refcolor_cli_empty");
    auto r = run_cli("shots --video-frames-dir " + dir.string() + " --out " + dir.string() + "_out");
    CHECK(r.exit_code == 2);
}

TEST_CASE("distfield converts line art with exact ink zeros") {
    const auto dir = fresh_dir("refcolor_cli_dist");
    data::Image line(16, 16, 1, 1.0f);
    for (int x = 3; x < 9; ++x) line.at(7, x, 0) = 0.0f;
    data::write_png((dir / "line.png").string(), line);

    auto r = run_cli("distfield --in " + (dir / "line.png").string() + " --out " +
                     (dir / "dist.png").string());
    REQUIRE(r.exit_code == 0);
    data::Image dist = data::read_png((dir / "dist.png").string());
    for (int x = 3; x < 9; ++x) CHECK(dist.at(7, x, 0) == 0.0f);
    CHECK(dist.at(0, 15, 0) > 0.0f);

    // Idempotent re-run produces identical bytes.
    const auto before = tree_hash(dir);
    auto r2 = run_cli("distfield --in " + (dir / "line.png").string() + " --out " +
                      (dir / "dist.png").string());
    REQUIRE(r2.exit_code == 0);
    CHECK(tree_hash(dir) == before);
}

TEST_CASE("train smoke run, resume log suffix, and stage preconditions") {
    const auto data_dir = fresh_dir("refcolor_cli_ds");
    REQUIRE(run_cli("synth --seed 9 --count 2 --frames 9 --size 32 --train-fraction 1.0 --out " +
                    data_dir.string())
                .exit_code == 0);
    const std::string manifest = (data_dir / "manifest.txt").string();

    // Temporal stage without a color checkpoint: exit 2.
    {
        auto r = run_cli("train --stage temporal --set dataset=" + manifest + " " + tiny_overrides() +
                         " --run-dir " + (fs::temp_directory_path() / "refcolor_cli_badrun").string());
        CHECK(r.exit_code == 2);
    }

    const auto run1 = fresh_dir("refcolor_cli_run1");
    auto r1 = run_cli("train --stage both --set dataset=" + manifest + " " + tiny_overrides() +
                      "--set steps_color=4 --set steps_temporal=2 --set seed=3 --set precision=f64 "
                      "--run-dir " + run1.string());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(fs::exists(run1 / "model.ckpt"));
    REQUIRE(fs::exists(run1 / "config.txt"));
    REQUIRE(fs::exists(run1 / "train_log.csv"));

    // Uninterrupted 6-step run vs 4 + resume 2: the log suffix must match.
    const auto run_full = fresh_dir("refcolor_cli_run_full");
    REQUIRE(run_cli("train --stage color --set dataset=" + manifest + " " + tiny_overrides() +
                    "--set steps_color=6 --set seed=4 --set precision=f64 --run-dir " +
                    run_full.string())
                .exit_code == 0);
    const auto run_a = fresh_dir("refcolor_cli_run_a");
    REQUIRE(run_cli("train --stage color --set dataset=" + manifest + " " + tiny_overrides() +
                    "--set steps_color=4 --set seed=4 --set precision=f64 --run-dir " + run_a.string())
                .exit_code == 0);
    const auto run_b = fresh_dir("refcolor_cli_run_b");
    REQUIRE(run_cli("train --stage color --resume " + (run_a / "model.ckpt").string() +
                    " --set steps_color=2 --run-dir " + run_b.string())
                .exit_code == 0);

    auto read_lines = [](const fs::path& p) {
        std::ifstream is(p);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty() && line[0] != '#') lines.push_back(line);
        return lines;
    };
    auto full = read_lines(run_full / "train_log.csv");
    auto tail = read_lines(run_b / "train_log.csv");
    REQUIRE(full.size() == 6);
    REQUIRE(tail.size() == 2);
    CHECK(full[4] == tail[0]);
    CHECK(full[5] == tail[1]);
}

TEST_CASE("colorize and eval close the loop") {
    const auto data_dir = fresh_dir("refcolor_cli_ds2");
    REQUIRE(run_cli("synth --seed 12 --count 2 --frames 8 --size 32 --train-fraction 0.5 --out " +
                    data_dir.string())
                .exit_code == 0);
    const std::string manifest = (data_dir / "manifest.txt").string();
    const auto run_dir = fresh_dir("refcolor_cli_run2");
    REQUIRE(run_cli("train --stage both --set dataset=" + manifest + " " + tiny_overrides() +
                    "--set steps_color=3 --set steps_temporal=2 --set seed=5 --run-dir " +
                    run_dir.string())
                .exit_code == 0);
    const std::string ckpt = (run_dir / "model.ckpt").string();

    // Build a line-art directory and references from the test split.
    data::Dataset ds = data::load_dataset(manifest);
    REQUIRE(!ds.test.empty());
    const auto& seq = ds.test[0];
    const auto lines_dir = fresh_dir("refcolor_cli_lines");
    const auto refs_dir = fresh_dir("refcolor_cli_refs");
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "line_%04zu.png", i);
        data::write_png((lines_dir / name).string(), seq.frames[i].line);
    }
    data::write_png((refs_dir / "ref_0_color.png").string(), seq.frames.front().color);
    data::write_png((refs_dir / "ref_0_line.png").string(), seq.frames.front().line);

    const auto out_dir = fresh_dir("refcolor_cli_colored");
    auto r = run_cli("colorize --ckpt " + ckpt + " --lines-dir " + lines_dir.string() + " --refs " +
                     refs_dir.string() + " --K 1 --out " + out_dir.string());
    REQUIRE(r.exit_code == 0);
    int produced = 0;
    for (const auto& e : fs::directory_iterator(out_dir)) {
        (void)e;
        ++produced;
    }
    CHECK(produced == static_cast<int>(seq.frames.size()));

    // Missing references: exit 2.
    const auto empty_refs = fresh_dir("refcolor_cli_norefs");
    CHECK(run_cli("colorize --ckpt " + ckpt + " --lines-dir " + lines_dir.string() + " --refs " +
                  empty_refs.string() + " --K 1 --out " + out_dir.string())
              .exit_code == 2);

    const auto eval_dir = fresh_dir("refcolor_cli_eval");
    auto ev = run_cli("eval --ckpt " + ckpt + " --dataset " + manifest + " --K 2 --out " +
                      eval_dir.string());
    REQUIRE(ev.exit_code == 0);
    CHECK(fs::exists(eval_dir / "eval.csv"));
    CHECK(fs::exists(eval_dir / "summary.txt"));
    CHECK(ev.output.find("mean_psnr") != std::string::npos);
}

TEST_CASE("gradcheck command reports every op and passes") {
    auto r = run_cli("gradcheck --scope op");
    REQUIRE(r.exit_code == 0);
    // Coverage: every differentiable engine op appears in the report.
    for (const char* op :
         {"matmul", "softmax", "conv2d", "conv3d", "instance_norm", "adain", "spectral_normalize",
          "upsample_nearest", "avg_pool2d", "relu", "leaky_relu", "sigmoid", "tanh", "softplus", "abs",
          "square", "affine", "neg", "add_broadcast", "sub_broadcast", "mul_broadcast", "sum_all",
          "mean_all", "mean_axes", "sum_axes", "reshape", "permute", "slice", "concat", "temporal_shift",
          "gated_conv3d"})
        CHECK(r.output.find(op) != std::string::npos);
    CHECK(r.output.find("all passed") != std::string::npos);
}
