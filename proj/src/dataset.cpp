#include "enzkit/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "enzkit/emb_io.hpp"
#include "enzkit/errors.hpp"
#include "enzkit/vocab.hpp"

namespace fs = std::filesystem;

namespace enzkit {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

constexpr const char* kHeader = "id\tsequence\tsmiles\tpocket_indices\tpocket_coords\tendpoint\tvalue";

}  // namespace

std::vector<SampleRecord> parse_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    const fs::path base = fs::path(path).parent_path();

    std::string line;
    int lineno = 0;
    bool header_seen = false;
    std::set<std::string> ids;
    std::vector<SampleRecord> records;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kHeader) fail(path, lineno, "bad header; expected \"" + std::string(kHeader) + "\"");
            header_seen = true;
            continue;
        }
        const auto cols = split(line, '\t');
        if (cols.size() != 7) {
            fail(path, lineno, "expected 7 columns, got " + std::to_string(cols.size()));
        }
        SampleRecord rec;
        rec.id = cols[0];
        if (rec.id.empty()) fail(path, lineno, "empty id");
        if (!ids.insert(rec.id).second) fail(path, lineno, "duplicate id \"" + rec.id + "\"");
        rec.sequence = cols[1];
        rec.smiles = cols[2];
        try {
            rec.enzyme_tokens = vocab::tokenize_enzyme(rec.sequence);
            rec.substrate_tokens = vocab::tokenize_substrate(rec.smiles);
        } catch (const VocabError& e) {
            fail(path, lineno, e.what());
        }

        for (const auto& part : split(cols[3], ';')) {
            try {
                size_t pos = 0;
                const int idx = std::stoi(part, &pos);
                if (pos != part.size()) throw std::invalid_argument("trailing");
                rec.pocket.push_back(idx);
            } catch (const std::exception&) {
                fail(path, lineno, "bad pocket index \"" + part + "\"");
            }
        }
        if (rec.pocket.empty()) fail(path, lineno, "empty pocket index set");
        for (size_t i = 0; i < rec.pocket.size(); ++i) {
            if (rec.pocket[i] < 0 ||
                rec.pocket[i] >= static_cast<int>(rec.enzyme_tokens.size())) {
                fail(path, lineno, "pocket index " + std::to_string(rec.pocket[i]) +
                                       " out of range for sequence length " +
                                       std::to_string(rec.enzyme_tokens.size()));
            }
            if (i > 0 && rec.pocket[i] <= rec.pocket[i - 1]) {
                fail(path, lineno, "pocket indices must be strictly increasing");
            }
        }

        const fs::path coords_path =
            fs::path(cols[4]).is_absolute() ? fs::path(cols[4]) : base / cols[4];
        TensorPtr coords;
        try {
            coords = read_emb1_file(coords_path.string());
        } catch (const std::exception& e) {
            fail(path, lineno, std::string("pocket coordinates: ") + e.what());
        }
        if (coords->rows != static_cast<int>(rec.pocket.size()) || coords->cols != 3) {
            fail(path, lineno, "pocket coordinates must be " + std::to_string(rec.pocket.size()) +
                                   "x3, got " + shape_str(*coords));
        }
        for (int i = 0; i < coords->rows; ++i) {
            rec.coords.push_back({coords->at(i, 0), coords->at(i, 1), coords->at(i, 2)});
        }

        try {
            rec.endpoint = parse_endpoint(cols[5]);
        } catch (const ConfigError& e) {
            fail(path, lineno, e.what());
        }
        try {
            size_t pos = 0;
            rec.y = std::stod(cols[6], &pos);
            if (pos != cols[6].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail(path, lineno, "bad value \"" + cols[6] + "\"");
        }
        if (!(rec.y > 0.0) || !std::isfinite(rec.y)) {
            fail(path, lineno, "target value must be positive and finite, got " + cols[6]);
        }
        rec.z = std::log10(rec.y);
        records.push_back(std::move(rec));
    }
    if (!header_seen) throw DataError(path + ": missing header row");
    return records;
}

std::string write_dataset(const std::string& dir, const std::vector<SampleRecord>& records) {
    fs::create_directories(fs::path(dir) / "coords");
    const std::string table = (fs::path(dir) / "data.tsv").string();
    std::ofstream out(table);
    if (!out) throw DataError("cannot open for writing: " + table);
    out << kHeader << "\n";
    char value[40];
    for (const auto& rec : records) {
        std::vector<double> flat;
        flat.reserve(rec.coords.size() * 3);
        for (const auto& c : rec.coords) flat.insert(flat.end(), c.begin(), c.end());
        const std::string rel = "coords/" + rec.id + ".emb";
        write_emb1_file((fs::path(dir) / rel).string(),
                        *make_tensor(static_cast<int>(rec.coords.size()), 3, flat));
        out << rec.id << '\t' << rec.sequence << '\t' << rec.smiles << '\t';
        for (size_t i = 0; i < rec.pocket.size(); ++i) {
            if (i) out << ';';
            out << rec.pocket[i];
        }
        std::snprintf(value, sizeof(value), "%.17g", rec.y);
        out << '\t' << rel << '\t' << to_string(rec.endpoint) << '\t' << value << "\n";
    }
    if (!out) throw DataError("write failed: " + table);
    return table;
}

}  // namespace enzkit
