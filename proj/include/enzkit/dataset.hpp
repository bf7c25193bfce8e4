#pragma once

#include <array>
#include <string>
#include <vector>

#include "enzkit/config.hpp"
#include "enzkit/moe.hpp"

namespace enzkit {

/**
 * One enzyme-substrate measurement. Targets are stored as published (positive
 * values, units opaque) with the log10 transform cached; pocket coordinates
 * live in a per-sample EMB1 sidecar referenced from the table.
 */
struct SampleRecord {
    std::string id;
    std::string sequence;
    std::string smiles;
    std::vector<int> enzyme_tokens;
    std::vector<int> substrate_tokens;
    std::vector<int> pocket;                    // sorted, strictly increasing
    std::vector<std::array<double, 3>> coords;  // |pocket| x 3, angstrom
    Endpoint endpoint = Endpoint::kcat;
    double y = 1.0;
    double z = 0.0;  // log10(y)

    PocketIndexSet pocket_set() const { return PocketIndexSet(pocket); }
};

/**
 * Tab-separated dataset: header row, columns
 *   id  sequence  smiles  pocket_indices  pocket_coords  endpoint  value
 * pocket_indices are semicolon-separated 0-based positions; pocket_coords is
 * the path (relative to the table) of an EMB1 file holding |pocket| x 3
 * coordinates; endpoint is kcat|km|ki; value must be positive. Lines starting
 * with '#' are comments. Malformed rows and duplicate ids are rejected with
 * their line number.
 */
std::vector<SampleRecord> parse_dataset(const std::string& path);

// Writes <dir>/data.tsv plus coords/<id>.emb sidecars; returns the table path.
std::string write_dataset(const std::string& dir, const std::vector<SampleRecord>& records);

}  // namespace enzkit
