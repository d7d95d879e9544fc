#include "drift/data/synthetic.hpp"

#include "drift/data/image_io.hpp"
#include "drift/errors.hpp"
#include "drift/hashing.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace drift::data {
namespace {

using Rgb = std::array<float, 3>;

const std::array<Rgb, 8> kPalette = {{{0.90f, 0.15f, 0.15f},
                                      {0.15f, 0.80f, 0.20f},
                                      {0.15f, 0.25f, 0.90f},
                                      {0.90f, 0.85f, 0.15f},
                                      {0.85f, 0.20f, 0.80f},
                                      {0.15f, 0.80f, 0.85f},
                                      {0.95f, 0.55f, 0.10f},
                                      {0.50f, 0.20f, 0.70f}}};

bool in_spurious_region(int y, int x, int size, SpuriousChannel channel) {
    if (channel == SpuriousChannel::border_color) {
        const int w = std::max(1, size / 8);
        return y < w || x < w || y >= size - w || x >= size - w;
    }
    const int p = std::max(2, size / 4);
    return y < p && x < p;
}

Image render(int cls, int color, const SyntheticBenchConfig& cfg, std::mt19937_64& rng) {
    const int n = cfg.image_size;
    Image img(3, n, n);
    std::uniform_real_distribution<double> jitter(-std::numbers::pi / 4, std::numbers::pi / 4);
    std::normal_distribution<double> noise(0.0, cfg.pixel_noise);
    const double theta = std::numbers::pi * cls / cfg.num_classes;
    const double phase = jitter(rng);
    constexpr double period = 4.0;
    const Rgb& rgb = kPalette[static_cast<std::size_t>(color)];
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            if (in_spurious_region(y, x, n, cfg.channel)) {
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(rgb[std::size_t(c)] + noise(rng));
            } else {
                const double t = 2.0 * std::numbers::pi * (x * std::cos(theta) + y * std::sin(theta)) / period;
                const double v = 0.5 + 0.3 * std::sin(t + phase) + noise(rng);
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    quantize_8bit(img);
    return img;
}

}  // namespace

const std::vector<std::string>& palette_names() {
    static const std::vector<std::string> names = {"red",     "green", "blue",   "yellow",
                                                   "magenta", "cyan",  "orange", "purple"};
    return names;
}

std::string synthetic_class_name(int c) { return fmt::format("class_{}", c); }

void SyntheticBenchConfig::validate() const {
    if (num_classes < 2 || num_classes > static_cast<int>(kPalette.size())) {
        throw ConfigError(fmt::format("synth.num_classes must be in [2, {}] (got {})", kPalette.size(),
                                      num_classes));
    }
    if (samples_per_class < 1) throw ConfigError("synth.samples_per_class must be >= 1");
    if (image_size < 16) throw ConfigError(fmt::format("synth.image_size must be >= 16 (got {})", image_size));
    if (!(rho_train >= 0.0 && rho_train <= 1.0)) {
        throw ConfigError(fmt::format("synth.rho_train must be in [0, 1] (got {})", rho_train));
    }
    if (!(rho_ood >= 0.0 && rho_ood <= 1.0)) {
        throw ConfigError(fmt::format("synth.rho_ood must be in [0, 1] (got {})", rho_ood));
    }
    if (!(pixel_noise >= 0.0)) throw ConfigError("synth.pixel_noise must be >= 0");
}

DatasetManifest generate_synthetic_benchmark(const SyntheticBenchConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    DatasetManifest m;
    m.name = "synthetic";
    for (int c = 0; c < cfg.num_classes; ++c) m.class_names.push_back(synthetic_class_name(c));
    m.provenance = fmt::format("synthetic benchmark seed={} rho_train={} rho_ood={}", cfg.seed,
                               cfg.rho_train, cfg.rho_ood);
    const char* region = cfg.channel == SpuriousChannel::border_color ? "border" : "corner patch";

    for (Split split : {Split::train, Split::test_id, Split::test_ood}) {
        const double rho = split == Split::test_ood ? cfg.rho_ood : cfg.rho_train;
        const int agree = static_cast<int>(std::lround(rho * cfg.samples_per_class));
        for (int c = 0; c < cfg.num_classes; ++c) {
            std::vector<bool> agrees(static_cast<std::size_t>(cfg.samples_per_class), false);
            std::fill(agrees.begin(), agrees.begin() + agree, true);
            std::shuffle(agrees.begin(), agrees.end(), rng);
            std::uniform_int_distribution<int> other(0, cfg.num_classes - 2);
            for (int i = 0; i < cfg.samples_per_class; ++i) {
                int color = c;
                if (!agrees[static_cast<std::size_t>(i)]) {
                    color = other(rng);
                    if (color >= c) ++color;
                }
                ExampleRecord r;
                r.id = fmt::format("synth-{}-{}-{:04d}", to_string(split), c, i);
                r.image = render(c, color, cfg, rng);
                r.label = c;
                r.class_name = m.class_names[static_cast<std::size_t>(c)];
                r.caption = template_caption(r.class_name);
                if (cfg.caption_spurious_phrase) {
                    r.caption += fmt::format(" with a {} {}", palette_names()[std::size_t(color)], region);
                }
                r.split = split;
                r.source_dataset = "synthetic";
                r.caption_source = "synthetic";
                m.records.push_back(std::move(r));
            }
        }
    }
    m.validate();
    return m;
}

int detect_spurious_color(const Image& image, SpuriousChannel channel, int num_classes) {
    Rgb mean{0, 0, 0};
    int count = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!in_spurious_region(y, x, image.height, channel)) continue;
            for (int c = 0; c < 3; ++c) mean[std::size_t(c)] += image.at(c, y, x);
            ++count;
        }
    }
    for (auto& v : mean) v /= static_cast<float>(std::max(count, 1));
    int best = 0;
    float best_d = 1e9f;
    for (int k = 0; k < num_classes; ++k) {
        float d = 0;
        for (int c = 0; c < 3; ++c) {
            const float diff = mean[std::size_t(c)] - kPalette[std::size_t(k)][std::size_t(c)];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::string manifest_content_hash(const DatasetManifest& manifest) {
    Sha256 h;
    h.update(manifest.name);
    for (const auto& n : manifest.class_names) h.update(n);
    for (const auto& r : manifest.records) {
        h.update(r.id).update(r.caption).update(to_string(r.split)).update_pod(r.label);
        const Image img = load_record_image(r);
        h.update_pod(img.channels).update_pod(img.height).update_pod(img.width);
        h.update(std::as_bytes(std::span<const float>(img.pixels)));
    }
    return h.hex_digest();
}

void to_json(nlohmann::json& j, const SyntheticBenchConfig& c) {
    j = nlohmann::json{{"num_classes", c.num_classes},
                       {"samples_per_class", c.samples_per_class},
                       {"image_size", c.image_size},
                       {"channel", c.channel == SpuriousChannel::border_color ? "border_color" : "corner_patch"},
                       {"rho_train", c.rho_train},
                       {"rho_ood", c.rho_ood},
                       {"caption_spurious_phrase", c.caption_spurious_phrase},
                       {"pixel_noise", c.pixel_noise},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SyntheticBenchConfig& c) {
    c.num_classes = j.at("num_classes").get<int>();
    c.samples_per_class = j.at("samples_per_class").get<int>();
    c.image_size = j.at("image_size").get<int>();
    const auto ch = j.at("channel").get<std::string>();
    if (ch == "border_color") {
        c.channel = SpuriousChannel::border_color;
    } else if (ch == "corner_patch") {
        c.channel = SpuriousChannel::corner_patch;
    } else {
        throw ConfigError(fmt::format("unknown spurious channel '{}'", ch));
    }
    c.rho_train = j.at("rho_train").get<double>();
    c.rho_ood = j.at("rho_ood").get<double>();
    c.caption_spurious_phrase = j.at("caption_spurious_phrase").get<bool>();
    c.pixel_noise = j.at("pixel_noise").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace drift::data
