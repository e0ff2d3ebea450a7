#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/data/dataset.hpp"
#include "refcolor/eval/evaluate.hpp"
#include "refcolor/net/parallel.hpp"
#include "refcolor/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace refcolor;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

train::TrainConfig resolve_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
    train::TrainConfig cfg;
    if (!config_path.empty()) cfg = train::TrainConfig::load_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("override must be key=value: " + kv);
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void write_run_config(const fs::path& run_dir, const train::TrainConfig& cfg) {
    fs::create_directories(run_dir);
    std::ofstream os(run_dir / "config.txt");
    if (!os) throw std::runtime_error("cannot write " + (run_dir / "config.txt").string());
    os << "# resolved configuration\n" << cfg.serialize();
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw UsageError("no .png files in " + dir.string());
    return files;
}

std::string seq_dir_name(std::size_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%03zu", idx);
    return buf;
}

// ---- synth ----

int cmd_synth(std::uint64_t seed, int count, int frames, int size, double train_fraction,
              const std::string& out, const std::string& style) {
    if (count < 1) throw UsageError("--count must be >= 1");
    fs::create_directories(out);
    data::SynthOpts opts;
    opts.n_frames = frames;
    opts.size = size;
    if (style == "warm") {
        opts.hue_min = 0.0;
        opts.hue_max = 0.2;
    } else if (style == "cool") {
        opts.hue_min = 0.45;
        opts.hue_max = 0.7;
    } else if (style != "any") {
        throw UsageError("--style must be any|warm|cool");
    }

    std::vector<data::Sequence> seqs(static_cast<std::size_t>(count));
    net::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
        seqs[i] = data::synth_sequence(splitmix64(seed + 0x51A97 * (i + 1)), opts);
    });
    data::Manifest manifest;
    const int n_train = std::max(1, static_cast<int>(std::lround(train_fraction * count)));
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const std::string dir = seq_dir_name(i);
        data::save_sequence((fs::path(out) / dir).string(), seqs[i]);
        manifest.entries.push_back({dir, static_cast<int>(i) < n_train ? "train" : "test",
                                    static_cast<int>(seqs[i].frames.size())});
    }
    data::save_manifest((fs::path(out) / "manifest.txt").string(), manifest);
    std::cout << "wrote " << count << " sequences to " << out << "\n";
    return 0;
}

// ---- shots ----

int cmd_shots(const std::string& frames_dir, const std::string& out, const train::TrainConfig& cfg) {
    const auto files = sorted_pngs(frames_dir);
    std::vector<data::Image> frames;
    frames.reserve(files.size());
    for (const auto& f : files) frames.push_back(data::read_png(f.string()));

    data::ShotSplitOpts sopts;
    sopts.cut_threshold = cfg.shot_cut_threshold;
    sopts.uniform_threshold = cfg.shot_uniform_threshold;
    sopts.min_length = cfg.shot_min_length;
    sopts.min_luminance = cfg.shot_min_luminance;
    sopts.min_channel_std = cfg.shot_min_channel_std;
    sopts.normalize_histograms = cfg.histogram_normalize;
    const auto shots = data::split_shots(frames, sopts);

    fs::create_directories(out);
    data::Manifest manifest;
    for (std::size_t s = 0; s < shots.size(); ++s) {
        data::Sequence seq;
        seq.source_id = seq_dir_name(s);
        seq.frames.resize(shots[s].size());
        net::parallel_for(shots[s].size(), [&](std::size_t i) {
            data::Frame fr;
            fr.color = shots[s][i];
            fr.line = data::edges_from_color(fr.color);
            fr.dist = data::distance_field(fr.line);
            seq.frames[i] = std::move(fr);
        });
        data::save_sequence((fs::path(out) / seq.source_id).string(), seq);
        manifest.entries.push_back({seq.source_id, "train", static_cast<int>(seq.frames.size())});
    }
    data::save_manifest((fs::path(out) / "manifest.txt").string(), manifest);
    std::cout << "split " << frames.size() << " frames into " << shots.size() << " sequences\n";
    return 0;
}

// ---- distfield ----

int cmd_distfield(const std::string& in, const std::string& out) {
    auto convert = [](const fs::path& src, const fs::path& dst) {
        data::Image line = data::read_png(src.string());
        if (line.c != 1) {
            data::Image gray(line.h, line.w, 1);
            for (int y = 0; y < line.h; ++y)
                for (int x = 0; x < line.w; ++x) {
                    float acc = 0;
                    for (int c = 0; c < line.c; ++c) acc += line.at(y, x, c);
                    gray.at(y, x, 0) = acc / static_cast<float>(line.c);
                }
            line = std::move(gray);
        }
        data::write_png(dst.string(), data::distance_field(line));
    };
    if (fs::is_directory(in)) {
        const auto files = sorted_pngs(in);
        fs::create_directories(out);
        std::atomic<int> done{0};
        net::parallel_for(files.size(), [&](std::size_t i) {
            convert(files[i], fs::path(out) / files[i].filename());
            ++done;
        });
        std::cout << "wrote " << done.load() << " distance fields to " << out << "\n";
    } else if (fs::is_regular_file(in)) {
        if (const auto parent = fs::path(out).parent_path(); !parent.empty())
            fs::create_directories(parent);
        convert(in, out);
        std::cout << "wrote " << out << "\n";
    } else {
        throw UsageError("input not found: " + in);
    }
    return 0;
}

// ---- train ----

class StepLogger {
  public:
    StepLogger(const fs::path& path, const char* stage, bool append)
        : os_(path, append ? std::ios::app : std::ios::out), stage_(stage) {
        if (!os_) throw std::runtime_error("cannot write " + path.string());
        if (!append) os_ << "# stage,step,loss_total,loss_L1,loss_perc,loss_style,loss_latent,loss_GAN_D,loss_GAN_G\n";
    }
    void operator()(const train::StepLog& l) {
        char buf[320];
        std::snprintf(buf, sizeof(buf), "%s,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", stage_,
                      static_cast<long long>(l.step), l.total, l.l1, l.perc, l.style, l.latent, l.gan_d,
                      l.gan_g);
        os_ << buf;
        os_.flush();
    }

  private:
    std::ofstream os_;
    const char* stage_;
};

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& stage, const std::string& run_dir, const std::string& resume) {
    train::TrainerState state = resume.empty()
                                    ? train::TrainerState::init(resolve_config(config_path, overrides))
                                    : train::load_checkpoint(resume);
    if (!resume.empty())
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("override must be key=value: " + kv);
            state.bundle.cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
        }
    const auto& cfg = state.bundle.cfg;
    if (cfg.dataset.empty()) throw UsageError("config must set dataset=<manifest path>");
    if (stage != "color" && stage != "temporal" && stage != "both")
        throw UsageError("--stage must be color, temporal, or both");
    if (stage == "temporal" && state.stage_done < 1)
        throw UsageError("temporal stage requires a color-stage checkpoint (--resume)");

    data::Dataset ds = data::load_dataset(cfg.dataset);
    write_run_config(run_dir, cfg);
    const bool append = !resume.empty();
    StepLogger logger(fs::path(run_dir) / "train_log.csv", stage == "temporal" ? "temporal" : "color",
                      append);

    if (stage == "color" || stage == "both") train::train_color_stage(state, ds.train, std::ref(logger));
    if (stage == "temporal" || stage == "both") {
        StepLogger tlogger(fs::path(run_dir) / "train_log.csv", "temporal", true);
        train::train_temporal_stage(state, ds.train, std::ref(tlogger));
    }
    const std::string ckpt = (fs::path(run_dir) / "model.ckpt").string();
    train::save_checkpoint(ckpt, state);
    std::cout << "checkpoint written to " << ckpt << "\n";
    return 0;
}

int cmd_finetune(const std::string& ckpt, const std::string& dataset, int seq_num,
                 const std::vector<std::string>& overrides, const std::string& run_dir) {
    train::TrainerState state = train::load_checkpoint(ckpt);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("override must be key=value: " + kv);
        state.bundle.cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    data::Dataset ds = data::load_dataset(dataset);
    if (seq_num < 1 || static_cast<std::size_t>(seq_num) > ds.train.size())
        throw UsageError("--seqs must be in [1, " + std::to_string(ds.train.size()) + "]");
    std::vector<data::Sequence> subset(ds.train.begin(), ds.train.begin() + seq_num);

    write_run_config(run_dir, state.bundle.cfg);
    StepLogger logger(fs::path(run_dir) / "train_log.csv", "finetune", false);
    train::fine_tune(state, subset, std::ref(logger));
    const std::string out = (fs::path(run_dir) / "model.ckpt").string();
    train::save_checkpoint(out, state);
    std::cout << "fine-tuned checkpoint written to " << out << "\n";
    return 0;
}

// ---- colorize ----

int cmd_colorize(const std::string& ckpt, const std::string& lines_dir, const std::string& refs_dir,
                 int k, bool no_temporal, const std::string& out) {
    train::TrainerState state = train::load_checkpoint(ckpt);
    const DType dt = state.bundle.cfg.dtype();
    (void)dt;

    const auto line_files = sorted_pngs(lines_dir);
    // refs_dir holds pairs ref_<i>_line.png / ref_<i>_color.png; a plain list
    // of color pngs is also accepted (lines derived by edge extraction).
    std::vector<data::Frame> refs;
    for (const auto& f : sorted_pngs(refs_dir)) {
        if (f.filename().string().find("_line") != std::string::npos) continue;
        data::Frame r;
        r.color = data::read_png(f.string());
        const auto line_path = f.parent_path() / (f.stem().string() + "_line.png");
        fs::path alt = f.parent_path() /
                       (f.stem().string().substr(0, f.stem().string().find("_color")) + "_line.png");
        if (fs::exists(line_path))
            r.line = data::read_png(line_path.string());
        else if (fs::exists(alt))
            r.line = data::read_png(alt.string());
        else
            r.line = data::edges_from_color(r.color);
        r.dist = data::distance_field(r.line);
        refs.push_back(std::move(r));
    }
    if (refs.empty()) throw UsageError("no reference color images in " + refs_dir);
    if (k < 1) throw UsageError("--K must be >= 1");

    // Build a pseudo-sequence: reference frames at their protocol positions,
    // targets from the line art directory.
    data::Sequence seq;
    seq.source_id = "colorize";
    for (const auto& f : line_files) {
        data::Frame fr;
        fr.line = data::read_png(f.string());
        if (fr.line.c != 1) throw UsageError("line art must be grayscale: " + f.string());
        fr.dist = data::distance_field(fr.line);
        fr.color = data::Image(fr.line.h, fr.line.w, 3, 0.0f);
        seq.frames.push_back(std::move(fr));
    }
    const auto ref_idx = eval::reference_indices(seq.frames.size(), k);
    if (ref_idx.size() > refs.size())
        throw UsageError("need " + std::to_string(ref_idx.size()) + " references, got " +
                         std::to_string(refs.size()));
    for (std::size_t i = 0; i < ref_idx.size(); ++i) {
        const auto& r = refs[i];
        if (r.color.h != seq.frames[0].line.h || r.color.w != seq.frames[0].line.w)
            throw UsageError("reference size differs from line art");
        seq.frames[ref_idx[i]] = r;
    }

    auto preds = eval::colorize_sequence(state.bundle, seq, k, !no_temporal);
    fs::create_directories(out);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "color_%04zu.png", i);
        data::write_png((fs::path(out) / name).string(), preds[i]);
    }
    std::cout << "wrote " << preds.size() << " frames to " << out << "\n";
    return 0;
}

// ---- eval ----

int cmd_eval(const std::string& ckpt, const std::string& dataset, int k, bool no_temporal,
             const std::string& out_dir) {
    train::TrainerState state = train::load_checkpoint(ckpt);
    data::Dataset ds = data::load_dataset(dataset);
    const auto& seqs = ds.test.empty() ? ds.train : ds.test;
    if (seqs.empty()) throw UsageError("dataset has no sequences");

    fs::create_directories(out_dir);
    std::ofstream table(fs::path(out_dir) / "eval.csv");
    table << "sequence,K,frame,mse,psnr,ssim\n";
    double mean_mse = 0, mean_psnr = 0, mean_ssim = 0, mean_ffd = 0;
    for (const auto& seq : seqs) {
        eval::EvalReport rep = eval::evaluate_sequence(state.bundle, seq, k, !no_temporal);
        for (const auto& fm : rep.frames) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%s,%d,%zu,%.8g,%.8g,%.8g\n", rep.sequence_id.c_str(), rep.k,
                          fm.frame_index, fm.mse, fm.psnr, fm.ssim);
            table << buf;
        }
        mean_mse += rep.mean_mse;
        mean_psnr += rep.mean_psnr;
        mean_ssim += rep.mean_ssim;
        mean_ffd += rep.ffd;
    }
    const double n = static_cast<double>(seqs.size());
    std::ofstream summary(fs::path(out_dir) / "summary.txt");
    char buf[256];
    std::snprintf(buf, sizeof(buf), "sequences=%zu\nK=%d\nmean_mse=%.8g\nmean_psnr=%.8g\nmean_ssim=%.8g\nmean_ffd=%.8g\n",
                  seqs.size(), k, mean_mse / n, mean_psnr / n, mean_ssim / n, mean_ffd / n);
    summary << buf;
    std::cout << buf;
    return 0;
}

// ---- gradcheck ----

int run_gradcheck(const std::string& scope); // defined in gradcheck_cmd.inc

} // namespace

#include "gradcheck_cmd.inc"

int main(int argc, char** argv) {
    CLI::App app{"reference-based line art video colorization"};
    app.require_subcommand(1);

    std::string config_path, run_dir = "runs/run", stage = "both", resume, ckpt, dataset, out, in;
    std::string lines_dir, refs_dir, frames_dir, style = "any", scope = "op";
    std::vector<std::string> overrides;
    std::uint64_t seed = 1;
    int count = 4, frames = 12, size = 64, k = 2;
    double train_fraction = 0.75;
    bool no_temporal = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic animation dataset");
    synth->add_option("--seed", seed);
    synth->add_option("--count", count);
    synth->add_option("--frames", frames);
    synth->add_option("--size", size);
    synth->add_option("--train-fraction", train_fraction);
    synth->add_option("--style", style, "palette family: any|warm|cool");
    synth->add_option("--out", out)->required();

    auto* shots = app.add_subcommand("shots", "split a frame directory into shot sequences");
    shots->add_option("--video-frames-dir", frames_dir)->required();
    shots->add_option("--out", out)->required();
    shots->add_option("--config", config_path);
    shots->add_option("--set", overrides, "config override key=value");

    auto* distfield = app.add_subcommand("distfield", "convert line art to distance field maps");
    distfield->add_option("--in", in)->required();
    distfield->add_option("--out", out)->required();

    auto* tr = app.add_subcommand("train", "run the two-stage training schedule");
    tr->add_option("--config", config_path);
    tr->add_option("--set", overrides, "config override key=value");
    tr->add_option("--stage", stage, "color|temporal|both");
    tr->add_option("--run-dir", run_dir);
    tr->add_option("--resume", resume, "checkpoint to continue from");

    auto* ft = app.add_subcommand("finetune", "fine-tune a checkpoint on new sequences");
    ft->add_option("--ckpt", ckpt)->required();
    ft->add_option("--dataset", dataset)->required();
    ft->add_option("--seqs", count, "number of sequences to use");
    ft->add_option("--set", overrides);
    ft->add_option("--run-dir", run_dir);

    auto* co = app.add_subcommand("colorize", "color a line art directory from references");
    co->add_option("--ckpt", ckpt)->required();
    co->add_option("--lines-dir", lines_dir)->required();
    co->add_option("--refs", refs_dir)->required();
    co->add_option("--K", k);
    co->add_flag("--no-temporal", no_temporal);
    co->add_option("--out", out)->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt)->required();
    ev->add_option("--dataset", dataset)->required();
    ev->add_option("--K", k);
    ev->add_flag("--no-temporal", no_temporal);
    ev->add_option("--out", out, "report directory");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gc->add_option("--scope", scope, "op|net");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(seed, count, frames, size, train_fraction, out, style);
        if (shots->parsed()) return cmd_shots(frames_dir, out, resolve_config(config_path, overrides));
        if (distfield->parsed()) return cmd_distfield(in, out);
        if (tr->parsed()) return cmd_train(config_path, overrides, stage, run_dir, resume);
        if (ft->parsed()) return cmd_finetune(ckpt, dataset, count, overrides, run_dir);
        if (co->parsed()) return cmd_colorize(ckpt, lines_dir, refs_dir, k, no_temporal, out);
        if (ev->parsed()) return cmd_eval(ckpt, dataset, k, no_temporal, out.empty() ? "eval_out" : out);
        if (gc->parsed()) return run_gradcheck(scope);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const train::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
