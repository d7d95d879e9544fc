#pragma once

#include "drift/data/manifest.hpp"

#include <cstdint>

namespace drift::data {

/// Keeps min(k, n_c) train records per class, drawn without replacement with a
/// generator seeded by `seed`; test splits pass through. Record order follows
/// the input manifest. Throws SamplingError when k < 1 or a class has no
/// train records.
DatasetManifest sample_few_shot(const DatasetManifest& manifest, int k, std::uint64_t seed);

}  // namespace drift::data
