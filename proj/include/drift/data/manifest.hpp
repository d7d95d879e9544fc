#pragma once

#include "drift/image.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drift::data {

inline constexpr int kManifestSchemaVersion = 1;

enum class Split { train, test_id, test_ood };

std::string to_string(Split s);
/// Throws ParseError for unknown names.
Split parse_split(const std::string& s);

struct ExampleRecord {
    std::string id;
    std::string image_path;        // resolved against the manifest directory on load
    std::optional<Image> image;    // inline tensor; takes precedence over image_path
    std::string caption;
    int label = 0;
    std::string class_name;
    Split split = Split::train;
    std::string source_dataset;
    std::string caption_source;    // e.g. "synthetic", "captioner", "template"

    bool operator==(const ExampleRecord&) const = default;
};

struct DatasetManifest {
    std::string name;
    std::vector<std::string> class_names;
    std::vector<ExampleRecord> records;
    std::string provenance;
    bool template_fallback = true;  // empty captions are legal only when true

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<const ExampleRecord*> split(Split s) const;

    /// Structural checks (C >= 2, labels in range, class names consistent,
    /// unique ids, captions). Throws ValidationError.
    void validate() const;
    /// Non-fatal findings, e.g. classes below the minimum image count.
    std::vector<std::string> warnings(int min_images_per_class = 100) const;

    bool operator==(const DatasetManifest&) const = default;
};

/// Newline-delimited JSON: a header object then one record object per line.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// The record's pixels, from the inline tensor or the image file.
Image load_record_image(const ExampleRecord& record);

/// "an image of <class_name>".
std::string template_caption(const std::string& class_name);

}  // namespace drift::data
