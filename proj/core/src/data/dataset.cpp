#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/data/dataset.hpp"

namespace fs = std::filesystem;

namespace refcolor::data {

namespace {

std::string frame_name(const char* stem, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04zu.png", stem, k);
    return buf;
}

} // namespace

void save_sequence(const std::string& dir, const Sequence& seq) {
    fs::create_directories(dir);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const auto& f = seq.frames[k];
        write_png((fs::path(dir) / frame_name("frame", k)).string(), f.color);
        write_png((fs::path(dir) / frame_name("line", k)).string(), f.line);
        write_png((fs::path(dir) / frame_name("dist", k)).string(), f.dist);
    }
}

Sequence load_sequence(const std::string& dir, const std::string& source_id) {
    Sequence seq;
    seq.source_id = source_id;
    for (std::size_t k = 0;; ++k) {
        const auto color_path = fs::path(dir) / frame_name("frame", k);
        if (!fs::exists(color_path)) break;
        Frame f;
        f.color = read_png(color_path.string());
        f.line = read_png((fs::path(dir) / frame_name("line", k)).string());
        f.dist = read_png((fs::path(dir) / frame_name("dist", k)).string());
        if (f.line.h != f.color.h || f.line.w != f.color.w || f.dist.h != f.color.h)
            throw std::runtime_error("load_sequence: mismatched frame sizes in " + dir);
        seq.frames.push_back(std::move(f));
    }
    if (seq.frames.empty()) throw std::runtime_error("load_sequence: no frames in " + dir);
    return seq;
}

void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot write " + path);
    os << "# refcolor dataset manifest v1\n";
    for (const auto& e : m.entries)
        os << "sequence=" << e.path << " split=" << e.split << " frames=" << e.frames << "\n";
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot read " + path);
    Manifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        ManifestEntry e;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "sequence")
                e.path = val;
            else if (key == "split")
                e.split = val;
            else if (key == "frames")
                e.frames = std::stoi(val);
        }
        if (e.path.empty() || (e.split != "train" && e.split != "test"))
            throw std::runtime_error("load_manifest: malformed line: " + line);
        m.entries.push_back(std::move(e));
    }
    return m;
}

Dataset load_dataset(const std::string& manifest_path) {
    const Manifest m = load_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    Dataset ds;
    for (const auto& e : m.entries) {
        Sequence seq = load_sequence((base / e.path).string(), e.path);
        if (e.split == "train")
            ds.train.push_back(std::move(seq));
        else
            ds.test.push_back(std::move(seq));
    }
    return ds;
}

} // namespace refcolor::data
