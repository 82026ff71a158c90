#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mritherm/errors.hpp"
#include "mritherm/image.hpp"
#include "mritherm/imgproc.hpp"
#include "mritherm/rng.hpp"
#include "mritherm/tensor.hpp"

namespace mritherm {
namespace data {

constexpr int kInputSize = 128;

/// Directory-name to binary-label mapping: anything tumorous collapses to 1.
inline const std::vector<std::pair<std::string, int>>& class_map() {
    static const std::vector<std::pair<std::string, int>> map = {
        {"no_tumor", 0}, {"glioma", 1}, {"meningioma", 1}, {"pituitary", 1}};
    return map;
}

struct ManifestEntry {
    std::string path;
    std::string class_name;
    int label = 0;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> warnings;  // unknown subdirectories, skipped
};

/// Enumerates PGM/PPM files under root/<class>/ for the known class names,
/// sorted by path. Unknown subdirectories produce a warning entry and are
/// skipped; a root yielding zero images is an error.
inline DatasetManifest scan_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ConfigError("dataset root is not a directory: " + root);
    DatasetManifest manifest;
    std::vector<std::string> subdirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) subdirs.push_back(entry.path().filename().string());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const std::string& sub : subdirs) {
        int label = -1;
        for (const auto& [name, l] : class_map()) {
            if (sub == name) label = l;
        }
        if (label < 0) {
            manifest.warnings.push_back("skipping unknown class directory: " + sub);
            continue;
        }
        for (const auto& entry : fs::directory_iterator(fs::path(root) / sub)) {
            if (!entry.is_regular_file()) continue;
            const std::string ext = entry.path().extension().string();
            if (ext != ".pgm" && ext != ".ppm") continue;
            manifest.entries.push_back({entry.path().string(), sub, label});
        }
    }
    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    if (manifest.entries.empty()) {
        throw ConfigError("no PGM/PPM images found under " + root);
    }
    return manifest;
}

/// Grayscale, resize to 128x128, scale into [0,1], replicate to three
/// channels.
inline Tensor preprocess(const ImageU8& img) {
    ImageU8 gray = imgproc::to_grayscale(img);
    ImageU8 sized = imgproc::resize_bilinear(gray, kInputSize, kInputSize);
    Tensor out(Shape::hwc(kInputSize, kInputSize, 3), 0.0f);
    for (int y = 0; y < kInputSize; ++y) {
        for (int x = 0; x < kInputSize; ++x) {
            const float v = static_cast<float>(static_cast<double>(sized.at(y, x)) / 255.0);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    }
    return out;
}

struct LabeledImage {
    ImageU8 image;
    int label = 0;
    std::string name;
};

/// Desk-scale stand-in for an MRI corpus: class 0 is a smooth elliptical
/// phantom with a soft logistic edge, class 1 adds one bright Gaussian blob
/// inside the same phantom. Pairs share phantom parameters, so each class-1
/// image is strictly brighter at its blob than its matched phantom anywhere.
inline std::vector<LabeledImage> generate_synthetic(int n_per_class, std::uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("generate_synthetic: n_per_class must be >= 1");
    Rng rng(seed);
    std::vector<LabeledImage> out;
    out.reserve(static_cast<std::size_t>(n_per_class) * 2);
    const int s = kInputSize;
    for (int i = 0; i < n_per_class; ++i) {
        const double cx = 63.5 + rng.uniform(-6.0, 6.0);
        const double cy = 63.5 + rng.uniform(-6.0, 6.0);
        const double a = rng.uniform(38.0, 50.0);
        const double b = rng.uniform(30.0, 44.0);
        const double tilt = rng.uniform(-0.08, 0.08);
        const double bu = rng.uniform(-1.0, 1.0);
        const double bv = rng.uniform(-1.0, 1.0);
        const double bx = cx + 0.40 * a * bu;
        const double by = cy + 0.40 * b * bv;
        const double bsigma = rng.uniform(8.0, 13.0);
        const double bamp = rng.uniform(110.0, 140.0);

        ImageU8 phantom(s, s, 1);
        ImageU8 tumor(s, s, 1);
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double dx = (x - cx) / a;
                const double dy = (y - cy) / b;
                const double r = std::sqrt(dx * dx + dy * dy);
                double base = 12.0 + 140.0 / (1.0 + std::exp((r - 1.0) * 10.0));
                base += tilt * (x - cx);
                const double px = std::clamp(base, 0.0, 255.0);
                phantom.at(y, x) = static_cast<std::uint8_t>(std::lround(px));
                const double ddx = x - bx;
                const double ddy = y - by;
                const double blob = bamp * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * bsigma * bsigma));
                const double tx = std::clamp(base + blob, 0.0, 255.0);
                tumor.at(y, x) = static_cast<std::uint8_t>(std::lround(tx));
            }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "c0_%04d", i);
        out.push_back({std::move(phantom), 0, name});
        std::snprintf(name, sizeof(name), "c1_%04d", i);
        out.push_back({std::move(tumor), 1, name});
    }
    return out;
}

/// Reads and preprocesses every manifest entry, in manifest order.
inline std::pair<std::vector<Tensor>, std::vector<int>> load_and_preprocess(
    const DatasetManifest& manifest) {
    std::vector<Tensor> images;
    std::vector<int> labels;
    images.reserve(manifest.entries.size());
    labels.reserve(manifest.entries.size());
    for (const ManifestEntry& entry : manifest.entries) {
        try {
            images.push_back(preprocess(imgio::read_pnm(entry.path)));
        } catch (const std::exception& e) {
            throw FormatError(entry.path + ": " + e.what());
        }
        labels.push_back(entry.label);
    }
    return {std::move(images), std::move(labels)};
}

/// CSV persistence: header line "path,class,label", one entry per row.
inline void write_manifest_csv(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open manifest file " + path);
    out << "path,class,label\n";
    for (const ManifestEntry& e : manifest.entries) {
        if (e.path.find(',') != std::string::npos) {
            throw FormatError("manifest path contains a comma: " + e.path);
        }
        out << e.path << ',' << e.class_name << ',' << e.label << '\n';
    }
    if (!out) throw FormatError("failed writing manifest file " + path);
}

inline DatasetManifest read_manifest_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open manifest file " + path);
    std::string line;
    if (!std::getline(in, line) || line != "path,class,label") {
        throw FormatError("manifest header must be 'path,class,label'");
    }
    DatasetManifest manifest;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1) {
            throw FormatError("manifest row needs 3 fields: " + line);
        }
        ManifestEntry e;
        e.path = line.substr(0, c1);
        e.class_name = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string label = line.substr(c2 + 1);
        if (label == "0") e.label = 0;
        else if (label == "1") e.label = 1;
        else throw FormatError("manifest label must be 0 or 1: " + line);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

}  // namespace data
}  // namespace mritherm
