#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enzkit/dataset.hpp"

namespace enzkit {

/**
 * Synthetic-data generator with planted staged structure. Each sample draws a
 * latent geometry regime that fixes the pocket template shape; every pocket
 * is rescaled to an exact target radius of gyration drawn independently of
 * the regime, so the regime is identifiable from shape statistics but not
 * from size alone. The target combines
 *   - a substrate x pocket-identity bilinear term (hash signatures), and
 *   - a regime-signed linear term in the radius of gyration,
 * plus Gaussian noise whose scale optionally grows with pocket size
 * (heteroscedastic mode). Alternating regime signs make a pooled size-only
 * fit uninformative while regime-conditioned fits recover the signal.
 */
struct GenSpec {
    int n_samples = 100;
    int enzyme_len_min = 16;
    int enzyme_len_max = 32;
    int substrate_len_min = 6;
    int substrate_len_max = 16;
    int pocket_min = 3;
    int pocket_max = 6;
    int regimes = 1;
    double noise = 0.0;
    bool heteroscedastic = false;
    double het_scale = 3.0;
    double bilinear_coeff = 1.0;  // substrate-recognition effect strength
    double geometry_coeff = 1.0;  // regime-signed size effect strength
    double coord_jitter = 0.05;   // template perturbation, fraction of scale
    Endpoint endpoint = Endpoint::kcat;

    void validate() const;  // throws ConfigError on inconsistent settings
};

GenSpec parse_gen_spec(const std::string& path);
GenSpec parse_gen_spec_text(const std::string& text, const std::string& origin);

struct SynthOut {
    std::vector<SampleRecord> records;
    std::vector<int> regimes;        // ground-truth labels, parallel to records
    std::vector<double> rog;         // planted radius of gyration per sample
    std::vector<double> noise_sigma; // per-sample noise scale actually used
};

SynthOut gen_synth(const GenSpec& spec, std::uint64_t seed);

// Per-regime sign/shape patterns, exposed for the generator's analytic tests.
double regime_sign(int regime);
double sample_radius_of_gyration(const std::vector<std::array<double, 3>>& coords);

// Writes data.tsv + coords/ via write_dataset plus the regimes.tsv sidecar;
// returns the table path.
std::string write_synth(const std::string& dir, const SynthOut& out);

}  // namespace enzkit
