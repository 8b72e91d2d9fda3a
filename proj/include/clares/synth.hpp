#pragma once

#include <cstdint>

#include "clares/data.hpp"

namespace clares {

// Synthetic scene generator for desk-scale runs and CI.
//
// Recipe (fully determined by the seed):
//   - classes * sites_per_class Voronoi sites drawn uniformly, assigned to
//     classes round-robin; each pixel takes the class of its nearest site,
//     giving spatially coherent regions;
//   - a fraction of pixels is marked unlabeled (class 0);
//   - pixel spectra are snr * mu_class(band) + N(0, 1) with the smooth
//     signatures mu_c(b) = sin(2*pi*((1 + c/2) * b / B + c / C)).
// snr = 0 therefore erases all class information.
struct SynthConfig {
    std::size_t classes = 4;
    std::size_t rows = 48, cols = 48, bands = 20;
    std::size_t sites_per_class = 3;
    double snr = 3.0;
    double unlabeled_frac = 0.1;
    std::uint64_t seed = 1;
};

struct SynthScene {
    HsiCube cube;
    LabelMap labels;
};

SynthScene make_synth(const SynthConfig& cfg);

// Class-mean spectrum, handy for separability checks.
std::vector<double> synth_signature(const SynthConfig& cfg, std::size_t cls);

}  // namespace clares
