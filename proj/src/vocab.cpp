#include "enzkit/vocab.hpp"

#include <array>
#include <cstring>

#include "enzkit/errors.hpp"

namespace enzkit {
namespace vocab {

namespace {

std::array<int, 256> build_enzyme_lut() {
    std::array<int, 256> lut;
    lut.fill(-1);
    for (int i = 0; i < kEnzymeSize; ++i)
        lut[static_cast<unsigned char>(kAminoAcids[i])] = i;
    return lut;
}

}  // namespace

std::vector<int> tokenize_enzyme(const std::string& sequence) {
    static const std::array<int, 256> lut = build_enzyme_lut();
    if (sequence.empty()) throw VocabError("enzyme sequence is empty");
    std::vector<int> out;
    out.reserve(sequence.size());
    for (size_t i = 0; i < sequence.size(); ++i) {
        const int id = lut[static_cast<unsigned char>(sequence[i])];
        if (id < 0) {
            throw VocabError("unknown enzyme token '" + std::string(1, sequence[i]) +
                             "' at position " + std::to_string(i));
        }
        out.push_back(id);
    }
    return out;
}

std::vector<int> tokenize_substrate(const std::string& smiles) {
    if (smiles.empty()) throw VocabError("substrate string is empty");
    std::vector<int> out;
    out.reserve(smiles.size());
    for (size_t i = 0; i < smiles.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(smiles[i]);
        if (c < kSubstrateFirst || c > kSubstrateLast) {
            throw VocabError("unknown substrate token (code " + std::to_string(c) +
                             ") at position " + std::to_string(i));
        }
        out.push_back(c - kSubstrateFirst);
    }
    return out;
}

char enzyme_letter(int token) {
    if (token < 0 || token >= kEnzymeSize) throw VocabError("enzyme token id out of range");
    return kAminoAcids[token];
}

}  // namespace vocab
}  // namespace enzkit
