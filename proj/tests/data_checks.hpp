#pragma once

// Frequency-count checks for the synthetic benchmark. Shared by the unit tests
// and the acceptance binary.

#include "drift/data/synthetic.hpp"

#include <cmath>
#include <map>
#include <string>

namespace drift::testing {

struct SplitCalibration {
    std::map<int, int> per_class;
    int agree = 0;
    int total = 0;
    int caption_mismatches = 0;  // caption colour phrase disagrees with the rendered pixels
    double rate() const { return total == 0 ? 0.0 : double(agree) / double(total); }
};

/// Counts colour agreement from the rendered pixels, not the generator's own
/// bookkeeping.
inline SplitCalibration calibrate_split(const data::DatasetManifest& m, data::Split split,
                                        const data::SyntheticBenchConfig& cfg) {
    SplitCalibration out;
    const auto& names = data::palette_names();
    for (const auto* r : m.split(split)) {
        ++out.per_class[r->label];
        ++out.total;
        const int colour = data::detect_spurious_color(*r->image, cfg.channel, cfg.num_classes);
        if (colour == r->label) ++out.agree;
        if (cfg.caption_spurious_phrase &&
            r->caption.find("with a " + names[std::size_t(colour)] + " ") == std::string::npos) {
            ++out.caption_mismatches;
        }
    }
    return out;
}

/// Normal-approximation 99% interval half-width for a rate rho over n draws.
inline double binomial_halfwidth_99(double rho, int n) { return 2.576 * std::sqrt(rho * (1.0 - rho) / double(n)); }

}  // namespace drift::testing
