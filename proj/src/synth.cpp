#include "enzkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "enzkit/errors.hpp"
#include "enzkit/rng.hpp"
#include "enzkit/vocab.hpp"

namespace enzkit {

namespace {

constexpr const char* kSubstrateChars = "CNOPSFcnos()=#123456789[]+-";
constexpr double kBaseRog = 2.5;  // angstrom; size jitter multiplies this
constexpr int kSignatureDim = 8;
constexpr std::uint64_t kSubstrateSalt = 0x5343;
constexpr std::uint64_t kPocketSalt = 0x504b;

// token-content hash mapped to [-1, 1]
double token_phi(int token, int component, std::uint64_t salt) {
    std::uint64_t h = splitmix64(salt);
    h = mix(h, static_cast<std::uint64_t>(token) + 1);
    h = mix(h, static_cast<std::uint64_t>(component) + 1);
    return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

// mean of phi over tokens, standardized to unit variance per component
// (phi is uniform on [-1,1], so the mean of L draws has variance 1/(3L))
std::vector<double> signature(const std::vector<int>& tokens, std::uint64_t salt) {
    std::vector<double> sig(kSignatureDim, 0.0);
    for (int j = 0; j < kSignatureDim; ++j) {
        for (int t : tokens) sig[j] += token_phi(t, j, salt);
        sig[j] *= std::sqrt(3.0 / static_cast<double>(tokens.size()));
    }
    return sig;
}

struct RegimeShape {
    double pitch;
    double radial_growth;
};

RegimeShape regime_shape(int regime) {
    static constexpr RegimeShape kShapes[] = {
        {0.12, 0.0}, {0.55, 0.3}, {0.95, -0.2}, {0.3, 0.5}, {0.75, 0.12}};
    return kShapes[regime % 5];
}

}  // namespace

double regime_sign(int regime) {
    static constexpr double kSigns[] = {1.0, -1.0, 0.5, -0.5, 0.75, -0.75};
    return kSigns[regime % 6];
}

double sample_radius_of_gyration(const std::vector<std::array<double, 3>>& coords) {
    std::array<double, 3> centroid = {0, 0, 0};
    for (const auto& c : coords)
        for (int d = 0; d < 3; ++d) centroid[d] += c[d];
    for (int d = 0; d < 3; ++d) centroid[d] /= coords.size();
    double acc = 0.0;
    for (const auto& c : coords)
        for (int d = 0; d < 3; ++d) acc += (c[d] - centroid[d]) * (c[d] - centroid[d]);
    return std::sqrt(acc / coords.size());
}

void GenSpec::validate() const {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (enzyme_len_min < 1 || enzyme_len_max < enzyme_len_min)
        throw ConfigError("enzyme length range is inconsistent");
    if (substrate_len_min < 1 || substrate_len_max < substrate_len_min)
        throw ConfigError("substrate length range is inconsistent");
    if (pocket_min < 1 || pocket_max < pocket_min)
        throw ConfigError("pocket size range is inconsistent");
    if (pocket_min > enzyme_len_min)
        throw ConfigError("pocket_min exceeds the shortest possible enzyme length");
    if (regimes < 1) throw ConfigError("regimes must be >= 1");
    if (noise < 0) throw ConfigError("noise must be >= 0");
    if (het_scale < 0) throw ConfigError("het_scale must be >= 0");
    if (coord_jitter < 0) throw ConfigError("coord_jitter must be >= 0");
    if (!std::isfinite(bilinear_coeff) || !std::isfinite(geometry_coeff))
        throw ConfigError("effect coefficients must be finite");
}

GenSpec parse_gen_spec_text(const std::string& text, const std::string& origin) {
    GenSpec spec;
    for (const auto& it : parse_kv_text(text, origin)) {
        auto as_int = [&]() {
            try {
                return std::stoi(it.value);
            } catch (const std::exception&) {
                throw ConfigError(origin + ":" + std::to_string(it.line) + ": bad integer for " +
                                  it.key);
            }
        };
        auto as_double = [&]() {
            try {
                return std::stod(it.value);
            } catch (const std::exception&) {
                throw ConfigError(origin + ":" + std::to_string(it.line) + ": bad number for " +
                                  it.key);
            }
        };
        auto as_bool = [&]() {
            if (it.value == "true" || it.value == "1") return true;
            if (it.value == "false" || it.value == "0") return false;
            throw ConfigError(origin + ":" + std::to_string(it.line) + ": bad boolean for " +
                              it.key);
        };
        if (it.key == "n_samples") spec.n_samples = as_int();
        else if (it.key == "enzyme_len_min") spec.enzyme_len_min = as_int();
        else if (it.key == "enzyme_len_max") spec.enzyme_len_max = as_int();
        else if (it.key == "substrate_len_min") spec.substrate_len_min = as_int();
        else if (it.key == "substrate_len_max") spec.substrate_len_max = as_int();
        else if (it.key == "pocket_min") spec.pocket_min = as_int();
        else if (it.key == "pocket_max") spec.pocket_max = as_int();
        else if (it.key == "regimes") spec.regimes = as_int();
        else if (it.key == "noise") spec.noise = as_double();
        else if (it.key == "heteroscedastic") spec.heteroscedastic = as_bool();
        else if (it.key == "het_scale") spec.het_scale = as_double();
        else if (it.key == "bilinear_coeff") spec.bilinear_coeff = as_double();
        else if (it.key == "geometry_coeff") spec.geometry_coeff = as_double();
        else if (it.key == "coord_jitter") spec.coord_jitter = as_double();
        else if (it.key == "endpoint") spec.endpoint = parse_endpoint(it.value);
        else
            throw ConfigError(origin + ":" + std::to_string(it.line) + ": unknown key \"" +
                              it.key + "\"");
    }
    spec.validate();
    return spec;
}

GenSpec parse_gen_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open generator spec: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_gen_spec_text(buf.str(), path);
}

SynthOut gen_synth(const GenSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(mix(seed, hash_str("gen_synth")));
    SynthOut out;
    out.records.reserve(spec.n_samples);

    for (int s = 0; s < spec.n_samples; ++s) {
        SampleRecord rec;
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "syn%05d", s);
        rec.id = idbuf;
        rec.endpoint = spec.endpoint;

        const int len_e = rng.uniform_int(spec.enzyme_len_min, spec.enzyme_len_max);
        for (int i = 0; i < len_e; ++i)
            rec.sequence.push_back(vocab::kAminoAcids[rng.uniform_int(0, 19)]);
        const int len_m = rng.uniform_int(spec.substrate_len_min, spec.substrate_len_max);
        const int n_chars = static_cast<int>(std::strlen(kSubstrateChars));
        for (int i = 0; i < len_m; ++i)
            rec.smiles.push_back(kSubstrateChars[rng.uniform_int(0, n_chars - 1)]);
        rec.enzyme_tokens = vocab::tokenize_enzyme(rec.sequence);
        rec.substrate_tokens = vocab::tokenize_substrate(rec.smiles);

        const int pocket_size = rng.uniform_int(spec.pocket_min,
                                                std::min(spec.pocket_max, len_e));
        std::vector<int> positions(len_e);
        for (int i = 0; i < len_e; ++i) positions[i] = i;
        rng.shuffle(positions);
        positions.resize(pocket_size);
        std::sort(positions.begin(), positions.end());
        rec.pocket = positions;

        const int regime = static_cast<int>(rng.below(spec.regimes));
        const RegimeShape shape = regime_shape(regime);
        const double target_rog = kBaseRog * rng.uniform(0.8, 1.6);

        // regime-shaped helix, jittered, then rescaled to the exact target
        // radius of gyration so size carries no regime information
        std::vector<std::array<double, 3>> pts(pocket_size);
        constexpr double kGolden = 2.399963229728653;
        for (int i = 0; i < pocket_size; ++i) {
            const double radius = 1.0 + shape.radial_growth * i / pocket_size;
            pts[i] = {radius * std::cos(kGolden * i), radius * std::sin(kGolden * i),
                      shape.pitch * (i - 0.5 * (pocket_size - 1))};
            for (int d = 0; d < 3; ++d) pts[i][d] += spec.coord_jitter * rng.normal();
        }
        std::array<double, 3> centroid = {0, 0, 0};
        for (const auto& p : pts)
            for (int d = 0; d < 3; ++d) centroid[d] += p[d];
        for (int d = 0; d < 3; ++d) centroid[d] /= pocket_size;
        double rog = 0.0;
        for (const auto& p : pts)
            for (int d = 0; d < 3; ++d) rog += (p[d] - centroid[d]) * (p[d] - centroid[d]);
        rog = std::sqrt(rog / pocket_size);
        const double rescale = pocket_size > 1 && rog > 0.0 ? target_rog / rog : 1.0;
        for (auto& p : pts)
            for (int d = 0; d < 3; ++d) p[d] = centroid[d] + (p[d] - centroid[d]) * rescale;

        // random rotation (quaternion) + translation
        double q[4];
        double qn = 0.0;
        for (double& v : q) {
            v = rng.normal();
            qn += v * v;
        }
        qn = std::sqrt(qn);
        for (double& v : q) v /= qn;
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        const double rot[3][3] = {
            {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
            {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
            {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
        const std::array<double, 3> shift = {rng.uniform(-10, 10), rng.uniform(-10, 10),
                                             rng.uniform(-10, 10)};
        rec.coords.resize(pocket_size);
        for (int i = 0; i < pocket_size; ++i) {
            for (int d = 0; d < 3; ++d) {
                rec.coords[i][d] = rot[d][0] * pts[i][0] + rot[d][1] * pts[i][1] +
                                   rot[d][2] * pts[i][2] + shift[d];
            }
        }
        const double actual_rog =
            pocket_size > 1 ? sample_radius_of_gyration(rec.coords) : 0.0;

        std::vector<int> pocket_tokens;
        for (int idx : rec.pocket) pocket_tokens.push_back(rec.enzyme_tokens[idx]);
        const auto sig_m = signature(rec.substrate_tokens, kSubstrateSalt);
        const auto sig_p = signature(pocket_tokens, kPocketSalt);
        double bilinear = 0.0;
        for (int j = 0; j < kSignatureDim; ++j) bilinear += sig_m[j] * sig_p[j];
        bilinear /= std::sqrt(static_cast<double>(kSignatureDim));

        const double size_feature = actual_rog / kBaseRog - 1.2;
        const double q_het = std::min(1.0, std::max(0.0, (actual_rog / kBaseRog - 0.8) / 0.8));
        const double sigma =
            spec.noise * (spec.heteroscedastic ? std::sqrt(1.0 + spec.het_scale * q_het) : 1.0);
        const double eps = sigma > 0.0 ? sigma * rng.normal() : 0.0;

        const double target_z = spec.bilinear_coeff * bilinear +
                                spec.geometry_coeff * regime_sign(regime) * size_feature + eps;
        rec.z = target_z;
        rec.y = std::pow(10.0, target_z);

        out.records.push_back(std::move(rec));
        out.regimes.push_back(regime);
        out.rog.push_back(actual_rog);
        out.noise_sigma.push_back(sigma);
    }
    return out;
}

std::string write_synth(const std::string& dir, const SynthOut& out) {
    const std::string table = write_dataset(dir, out.records);
    const std::string sidecar = (std::filesystem::path(dir) / "regimes.tsv").string();
    std::ofstream side(sidecar);
    if (!side) throw DataError("cannot open for writing: " + sidecar);
    side << "id\tregime\trog\tsigma\n";
    char buf[64];
    for (size_t i = 0; i < out.records.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g\t%.17g", out.rog[i], out.noise_sigma[i]);
        side << out.records[i].id << '\t' << out.regimes[i] << '\t' << buf << "\n";
    }
    if (!side) throw DataError("write failed: " + sidecar);
    return table;
}

}  // namespace enzkit
