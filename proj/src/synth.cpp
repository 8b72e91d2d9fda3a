#include "clares/synth.hpp"

#include <cmath>

#include "clares/error.hpp"

namespace clares {

std::vector<double> synth_signature(const SynthConfig& cfg, std::size_t cls) {
    std::vector<double> mu(cfg.bands);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double freq = 1.0 + 0.5 * static_cast<double>(cls);
    const double phase = static_cast<double>(cls) / static_cast<double>(cfg.classes);
    for (std::size_t b = 0; b < cfg.bands; ++b) {
        const double x = static_cast<double>(b) / static_cast<double>(cfg.bands);
        mu[b] = std::sin(kTwoPi * (freq * x + phase));
    }
    return mu;
}

SynthScene make_synth(const SynthConfig& cfg) {
    if (cfg.classes < 2) throw ArgumentError("synth: need at least 2 classes");
    if (cfg.rows == 0 || cfg.cols == 0 || cfg.bands == 0)
        throw ArgumentError("synth: degenerate scene dimensions");
    Rng rng(cfg.seed);
    Rng site_rng = rng.split();
    Rng label_rng = rng.split();
    Rng noise_rng = rng.split();

    const std::size_t n_sites = cfg.classes * cfg.sites_per_class;
    std::vector<double> site_r(n_sites), site_c(n_sites);
    std::vector<std::size_t> site_class(n_sites);
    for (std::size_t s = 0; s < n_sites; ++s) {
        site_r[s] = site_rng.next_double() * static_cast<double>(cfg.rows);
        site_c[s] = site_rng.next_double() * static_cast<double>(cfg.cols);
        site_class[s] = s % cfg.classes;  // round-robin
    }

    SynthScene scene;
    scene.labels.rows = cfg.rows;
    scene.labels.cols = cfg.cols;
    scene.labels.labels.resize(cfg.rows * cfg.cols);
    scene.cube.rows = cfg.rows;
    scene.cube.cols = cfg.cols;
    scene.cube.bands = cfg.bands;
    scene.cube.data.resize(cfg.rows * cfg.cols * cfg.bands);

    std::vector<std::vector<double>> mu(cfg.classes);
    for (std::size_t c = 0; c < cfg.classes; ++c) mu[c] = synth_signature(cfg, c);

    for (std::size_t r = 0; r < cfg.rows; ++r)
        for (std::size_t c = 0; c < cfg.cols; ++c) {
            std::size_t best = 0;
            double best_d = 1e300;
            for (std::size_t s = 0; s < n_sites; ++s) {
                const double dr = static_cast<double>(r) + 0.5 - site_r[s];
                const double dc = static_cast<double>(c) + 0.5 - site_c[s];
                const double d = dr * dr + dc * dc;
                if (d < best_d) {
                    best_d = d;
                    best = s;
                }
            }
            const std::size_t cls = site_class[best];
            const bool labeled = label_rng.next_double() >= cfg.unlabeled_frac;
            scene.labels.labels[r * cfg.cols + c] =
                labeled ? static_cast<std::int32_t>(cls + 1) : 0;
            float* px = &scene.cube.data[(r * cfg.cols + c) * cfg.bands];
            for (std::size_t b = 0; b < cfg.bands; ++b)
                px[b] = static_cast<float>(cfg.snr * mu[cls][b] + noise_rng.gaussian());
        }
    return scene;
}

}  // namespace clares
