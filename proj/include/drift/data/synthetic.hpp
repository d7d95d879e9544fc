#pragma once

#include "drift/data/manifest.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace drift::data {

enum class SpuriousChannel { border_color, corner_patch };

/// Desk-scale spurious-correlation benchmark.
///
/// Each image carries a class-determining stripe texture (the invariant
/// signal) and a coloured border or corner patch (the spurious signal). In a
/// split with correlation rho, round(rho * samples_per_class) images of each
/// class use that class's colour and the rest use one of the other colours
/// uniformly at random.
struct SyntheticBenchConfig {
    int num_classes = 4;
    int samples_per_class = 64;     // per class, per split
    int image_size = 16;
    SpuriousChannel channel = SpuriousChannel::border_color;
    double rho_train = 0.95;        // train and test_id
    double rho_ood = 0.25;          // test_ood
    bool caption_spurious_phrase = true;
    double pixel_noise = 0.08;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SyntheticBenchConfig&) const = default;
};

const std::vector<std::string>& palette_names();
std::string synthetic_class_name(int c);

DatasetManifest generate_synthetic_benchmark(const SyntheticBenchConfig& cfg);

/// Colour index rendered into an image by the generator (nearest palette
/// entry over the spurious region); used by tests and diagnostics.
int detect_spurious_color(const Image& image, SpuriousChannel channel, int num_classes);

/// SHA-256 over every record's pixels, caption, label and split.
std::string manifest_content_hash(const DatasetManifest& manifest);

void to_json(nlohmann::json& j, const SyntheticBenchConfig& c);
void from_json(const nlohmann::json& j, SyntheticBenchConfig& c);

}  // namespace drift::data
