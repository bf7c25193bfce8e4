#include "enzkit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "enzkit/emb_io.hpp"
#include "enzkit/errors.hpp"

namespace enzkit {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kConfigSection = "__config__";

void put_u16(std::ostream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t get_u16(std::istream& in, std::uint64_t at) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2) throw FormatError("CKPT: truncated section name length", at);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in, std::uint64_t at, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw FormatError(std::string("CKPT: truncated ") + what, at);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

TensorPtr config_as_tensor(const std::string& text) {
    std::vector<double> payload(text.size());
    for (size_t i = 0; i < text.size(); ++i)
        payload[i] = static_cast<double>(static_cast<unsigned char>(text[i]));
    return make_tensor(1, static_cast<int>(text.size()), std::move(payload));
}

std::string tensor_as_config(const Tensor& t) {
    std::string text(t.data.size(), '\0');
    for (size_t i = 0; i < t.data.size(); ++i)
        text[i] = static_cast<char>(static_cast<unsigned char>(t.data[i]));
    return text;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    const std::string config_text = canonical_config_text(model.cfg);
    const auto& entries = model.reg.entries();

    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(entries.size() + 1));

    auto write_section = [&](const std::string& name, const Tensor& t) {
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_emb1(out, t);
    };
    write_section(kConfigSection, *config_as_tensor(config_text));
    for (const auto& e : entries) write_section(e.name, *e.tensor);

    const auto digest = config_hash(config_text);
    out.write(reinterpret_cast<const char*>(digest.data()),
              static_cast<std::streamsize>(digest.size()));
    if (!out) throw DataError("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4) throw FormatError("CKPT: truncated magic", 0);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("CKPT: bad magic \"" + std::string(magic, 4) + "\"", 0);
    }
    const std::uint32_t version = get_u32(in, 4, "version");
    if (version != kVersion) {
        throw FormatError("CKPT: unsupported version " + std::to_string(version), 4);
    }
    const std::uint32_t section_count = get_u32(in, 8, "section count");
    if (section_count < 1) throw FormatError("CKPT: no sections", 8);

    std::uint64_t offset = 12;
    std::vector<std::pair<std::string, TensorPtr>> sections;
    for (std::uint32_t s = 0; s < section_count; ++s) {
        const std::uint16_t name_len = get_u16(in, offset);
        offset += 2;
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != name_len) throw FormatError("CKPT: truncated section name", offset);
        offset += name_len;
        TensorPtr t = read_emb1(in, offset);
        offset += 24 + static_cast<std::uint64_t>(t->data.size()) * 4;
        sections.emplace_back(std::move(name), std::move(t));
    }

    unsigned char trailer[32];
    in.read(reinterpret_cast<char*>(trailer), 32);
    if (in.gcount() != 32) throw FormatError("CKPT: truncated config-hash trailer", offset);

    if (sections.front().first != kConfigSection) {
        throw FormatError("CKPT: first section must be " + std::string(kConfigSection), 12);
    }
    const std::string config_text = tensor_as_config(*sections.front().second);
    const auto digest = config_hash(config_text);
    if (std::memcmp(digest.data(), trailer, 32) != 0) {
        std::fprintf(stderr,
                     "[warn] %s: config-hash trailer does not match the embedded config\n",
                     path.c_str());
    }

    TrainConfig cfg = parse_train_config_text(config_text, path + "#__config__");
    Model model = Model::build(cfg);
    const auto& entries = model.reg.entries();
    if (sections.size() != entries.size() + 1) {
        throw FormatError("CKPT: section count " + std::to_string(sections.size() - 1) +
                              " does not match the " + std::to_string(entries.size()) +
                              " parameters this config defines",
                          8);
    }
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& [name, tensor] = sections[i + 1];
        if (name != entries[i].name) {
            throw FormatError("CKPT: section \"" + name + "\" where \"" + entries[i].name +
                                  "\" was expected",
                              12);
        }
        if (tensor->rows != entries[i].tensor->rows || tensor->cols != entries[i].tensor->cols) {
            throw FormatError("CKPT: section \"" + name + "\" has shape " + shape_str(*tensor) +
                                  ", expected " + shape_str(*entries[i].tensor),
                              12);
        }
        entries[i].tensor->data = tensor->data;
    }
    return model;
}

}  // namespace enzkit
