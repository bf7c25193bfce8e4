#pragma once

#include <string>
#include <vector>

namespace enzkit {

// Enzyme tokens: the 20 amino-acid letters plus X for unknown residues.
// Substrate tokens: one printable ASCII character (33..126) per token, so any
// SMILES string tokenizes without a chemistry-aware parser.
namespace vocab {

inline constexpr const char* kAminoAcids = "ACDEFGHIKLMNPQRSTVWYX";
inline constexpr int kEnzymeSize = 21;
inline constexpr int kSubstrateFirst = 33;
inline constexpr int kSubstrateLast = 126;
inline constexpr int kSubstrateSize = kSubstrateLast - kSubstrateFirst + 1;

// Throw VocabError naming the offending position on unknown characters.
std::vector<int> tokenize_enzyme(const std::string& sequence);
std::vector<int> tokenize_substrate(const std::string& smiles);

char enzyme_letter(int token);

}  // namespace vocab

}  // namespace enzkit
