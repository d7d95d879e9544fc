#include "drift/data/few_shot.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <random>
#include <set>

namespace drift::data {

DatasetManifest sample_few_shot(const DatasetManifest& manifest, int k, std::uint64_t seed) {
    if (k < 1) throw SamplingError(fmt::format("shots per class must be >= 1 (got {})", k));
    std::vector<std::vector<std::size_t>> by_class(manifest.class_names.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.split == Split::train) by_class.at(static_cast<std::size_t>(r.label)).push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::set<std::size_t> chosen;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) {
            throw SamplingError(fmt::format("class '{}' has no train records", manifest.class_names[c]));
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
        chosen.insert(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    DatasetManifest out = manifest;
    out.records.clear();
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.split != Split::train || chosen.count(i)) out.records.push_back(r);
    }
    out.provenance = fmt::format("{}{}few-shot k={} seed={}", manifest.provenance,
                                 manifest.provenance.empty() ? "" : "; ", k, seed);
    return out;
}

}  // namespace drift::data
