#pragma once

// Dataset manifest: the JSON document the feature extractor emits and the
// engine consumes. Paths inside it are relative to the manifest's directory
// and are stored here already resolved.

#include "lake/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lake {

struct SupportEntry {
    std::string id;
    std::filesystem::path features;  // layer-l tensor, N x D
};

struct TestEntry {
    std::string id;
    std::filesystem::path features;     // layer-l tensor, N x D
    std::filesystem::path features_lp;  // layer-l' tensor, N x D_t
    int label = 0;                      // 1 = anomalous
    std::optional<std::filesystem::path> mask;  // uint8 H x W
};

struct TextEntry {
    std::filesystem::path t_norm;
    std::filesystem::path t_anom;
    std::string template_normal;
    std::string template_anomalous;
};

struct DatasetManifest {
    std::filesystem::path root;  // directory the relative paths were resolved against
    std::string category;
    ImageSize image_size;
    Grid grid;
    Index dim = 0;       // D, width of layer l
    Index text_dim = 0;  // D_t, width of layer l'
    int layer = 0;       // l
    int layer_lp = 0;    // l'
    std::vector<SupportEntry> support;
    std::vector<TestEntry> test;
    TextEntry text;

    std::size_t shots() const noexcept { return support.size(); }
};

/// Parses and fully validates a manifest: schema, file existence, NPY shapes.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Same validation applied to an in-memory JSON string; `root` anchors relative paths.
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& root);

/// Writes the manifest back to JSON with paths relative to `manifest.root`.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace lake
