#pragma once

#include <string>
#include <vector>

#include "refcolor/data/image.hpp"

namespace refcolor::data {

struct ManifestEntry {
    std::string path; // sequence directory, relative to the manifest
    std::string split; // "train" or "test"
    int frames = 0;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

// Directory layout: <dir>/frame_<k>.png, line_<k>.png, dist_<k>.png.
void save_sequence(const std::string& dir, const Sequence& seq);
Sequence load_sequence(const std::string& dir, const std::string& source_id);

void save_manifest(const std::string& path, const Manifest& m);
Manifest load_manifest(const std::string& path);

struct Dataset {
    std::vector<Sequence> train;
    std::vector<Sequence> test;
};

// Loads every sequence named by the manifest (paths resolved relative to it).
Dataset load_dataset(const std::string& manifest_path);

} // namespace refcolor::data
