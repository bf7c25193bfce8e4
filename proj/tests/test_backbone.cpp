#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "enzkit/backbone.hpp"
#include "enzkit/emb_io.hpp"
#include "enzkit/grad_check.hpp"
#include "enzkit/rng.hpp"
#include "enzkit/vocab.hpp"

using namespace enzkit;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/enzkit_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

// Rotation from a random unit quaternion.
std::array<std::array<double, 3>, 3> random_rotation(Rng& rng) {
    double q[4];
    double norm = 0.0;
    for (double& v : q) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : q) v /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

BackboneParams micro_backbone(ParamRegistry& reg, int dim = 8, int lora_rank = 2) {
    return build_backbone(reg, dim, 2, 64, 1337, lora_rank, 16.0, 0.1, 42);
}

}  // namespace

TEST_CASE("EMB1 roundtrip preserves shape and values at f32 precision") {
    Rng rng(7);
    std::vector<double> v(40);
    for (auto& x : v) x = rng.normal(0.0, 3.0);
    auto t = make_tensor(5, 8, v);
    TempFile f("roundtrip.emb");
    write_emb1_file(f.path, *t);
    auto back = read_emb1_file(f.path);
    REQUIRE(back->rows == 5);
    REQUIRE(back->cols == 8);
    for (size_t i = 0; i < v.size(); ++i) {
        CHECK(std::fabs(back->data[i] - v[i]) <= std::fabs(v[i]) * 0x1.0p-24 + 1e-300);
    }
}

TEST_CASE("EMB1 simple 2x3 roundtrip") {
    auto t = make_tensor(2, 3, {1, 2, 3, 4, 5, 6});
    std::stringstream buf;
    write_emb1(buf, *t);
    auto back = read_emb1(buf);
    CHECK(back->rows == 2);
    CHECK(back->cols == 3);
    CHECK(back->data == t->data);
}

TEST_CASE("EMB1 rejects bad magic, truncation, extent overflow") {
    {
        std::stringstream buf;
        buf.write("XXXX", 4);
        CHECK_THROWS_AS(read_emb1(buf), FormatError);
    }
    {
        auto t = make_tensor(2, 2, {1, 2, 3, 4});
        std::stringstream buf;
        write_emb1(buf, *t);
        std::string bytes = buf.str();
        bytes.resize(bytes.size() - 5);
        std::stringstream cut(bytes);
        try {
            read_emb1(cut);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.byte_offset >= 24);
        }
    }
    {
        std::stringstream buf;
        buf.write("EMB1", 4);
        const unsigned char rest[] = {1, 0, 0, 0,                          // version
                                      0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x7f,  // rows
                                      2, 0, 0, 0, 0, 0, 0, 0};             // cols
        buf.write(reinterpret_cast<const char*>(rest), sizeof(rest));
        try {
            read_emb1(buf);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("extent overflow") != std::string::npos);
            CHECK(e.byte_offset == 8);
        }
    }
}

TEST_CASE("tokenizers flag the offending position") {
    CHECK(vocab::tokenize_enzyme("ACDX") == std::vector<int>{0, 1, 2, 20});
    try {
        vocab::tokenize_enzyme("ACB");
        FAIL("expected VocabError");
    } catch (const VocabError& e) {
        CHECK(std::string(e.what()).find("position 2") != std::string::npos);
    }
    CHECK(vocab::tokenize_substrate("C(=O)") ==
          std::vector<int>{'C' - 33, '(' - 33, '=' - 33, 'O' - 33, ')' - 33});
    CHECK_THROWS_AS(vocab::tokenize_substrate(std::string(1, '\t')), VocabError);
    CHECK_THROWS_AS(vocab::tokenize_enzyme(""), VocabError);
}

TEST_CASE("fresh adapters are an exact no-op") {
    ParamRegistry reg;
    auto bb = micro_backbone(reg);
    auto tokens = vocab::tokenize_enzyme("MKVLAT");

    Tape t1;
    auto with = encode_enzyme(t1, tokens, bb, DropoutCtx::off());

    BackboneParams stripped = bb;
    for (auto& layer : stripped.layers) {
        layer.lora_q = LoraAdapter{};
        layer.lora_v = LoraAdapter{};
    }
    Tape t2;
    auto without = encode_enzyme(t2, tokens, stripped, DropoutCtx::off());
    CHECK(with->data == without->data);
}

TEST_CASE("encode_enzyme shape, determinism, and vocabulary errors") {
    ParamRegistry reg;
    auto bb = micro_backbone(reg);

    Tape t1;
    auto one = encode_enzyme(t1, {3}, bb, DropoutCtx::off());
    CHECK(one->rows == 1);
    CHECK(one->cols == 8);

    auto tokens = vocab::tokenize_enzyme("GATTACAWY");
    Tape t2, t3;
    auto a = encode_enzyme(t2, tokens, bb, DropoutCtx::off());
    auto b = encode_enzyme(t3, tokens, bb, DropoutCtx::off());
    CHECK(a->data == b->data);

    Tape t4;
    CHECK_THROWS_AS(encode_enzyme(t4, {0, 99}, bb, DropoutCtx::off()), VocabError);
    std::vector<int> too_long(65, 0);
    CHECK_THROWS_AS(encode_enzyme(t4, too_long, bb, DropoutCtx::off()), PreconditionError);
}

TEST_CASE("lora dropout is keyed, not scheduled") {
    ParamRegistry reg;
    auto bb = micro_backbone(reg);
    // push the up matrices off zero so the adapter path carries signal
    for (auto& layer : bb.layers) {
        for (auto& v : layer.lora_q.up->data) v = 0.3;
        for (auto& v : layer.lora_v.up->data) v = -0.2;
    }
    auto tokens = vocab::tokenize_enzyme("MKVLATX");
    Tape t1, t2, t3, t4;
    auto drop_a = encode_enzyme(t1, tokens, bb, DropoutCtx::train(9, 1, 5));
    auto drop_b = encode_enzyme(t2, tokens, bb, DropoutCtx::train(9, 1, 5));
    auto drop_c = encode_enzyme(t3, tokens, bb, DropoutCtx::train(9, 1, 6));
    auto eval = encode_enzyme(t4, tokens, bb, DropoutCtx::off());
    CHECK(drop_a->data == drop_b->data);  // same key, same mask
    CHECK(drop_a->data != drop_c->data);  // sample ordinal changes the mask
    CHECK(drop_a->data != eval->data);
}

TEST_CASE("encode_substrate is a pure gather") {
    ParamRegistry reg;
    auto table = build_substrate_table(reg, 6, 11);

    Tape tape;
    auto rep = encode_substrate(tape, {0, 0, 0}, table);
    REQUIRE(rep->rows == 3);
    for (int j = 0; j < 6; ++j) {
        CHECK(rep->at(0, j) == rep->at(1, j));
        CHECK(rep->at(1, j) == rep->at(2, j));
        CHECK(rep->at(0, j) == table->at(0, j));
    }

    auto two = encode_substrate(tape, {5, 17}, table);
    for (int j = 0; j < 6; ++j) {
        CHECK(two->at(0, j) == table->at(5, j));
        CHECK(two->at(1, j) == table->at(17, j));
    }

    CHECK_THROWS_AS(encode_substrate(tape, {vocab::kSubstrateSize}, table), VocabError);

    // permuting table rows and ids consistently leaves output unchanged
    std::vector<int> perm(vocab::kSubstrateSize);
    Rng rng(5);
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    std::vector<double> shuffled(table->data.size());
    std::vector<int> inverse(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
    for (int r = 0; r < table->rows; ++r)
        for (int c = 0; c < 6; ++c)
            shuffled[static_cast<size_t>(inverse[r]) * 6 + c] = table->at(r, c);
    auto table2 = make_tensor(table->rows, 6, shuffled);
    std::vector<int> ids = {3, 40, 3, 12};
    std::vector<int> mapped;
    for (int id : ids) mapped.push_back(inverse[id]);
    auto base = encode_substrate(tape, ids, table);
    auto permuted = encode_substrate(tape, mapped, table2);
    CHECK(base->data == permuted->data);
}

TEST_CASE("geometry stats: degenerate pocket and two residues at 3 angstrom") {
    auto single = geometry_stats({{{1.0, 2.0, 3.0}}});
    CHECK(single == std::vector<double>{0, 0, 0, 0});

    auto pair = geometry_stats({{{0, 0, 0}}, {{3, 0, 0}}});
    // both rows: min = mean = max = 3, centroid distance 1.5
    for (int i = 0; i < 2; ++i) {
        CHECK(pair[i * 4 + 0] == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(pair[i * 4 + 1] == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(pair[i * 4 + 2] == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(pair[i * 4 + 3] == doctest::Approx(1.5).epsilon(1e-14));
    }
}

TEST_CASE("encode_geometry is invariant to rigid motion") {
    ParamRegistry reg;
    auto geo = build_geometry(reg, 8, 23);
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = rng.uniform_int(1, 6);
        GeometryInput in;
        for (int i = 0; i < n; ++i) {
            in.coords.push_back({rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5)});
            in.residue_tokens.push_back(rng.uniform_int(0, 20));
        }
        Tape tape;
        auto base = encode_geometry(tape, in, geo);

        const auto rot = random_rotation(rng);
        const std::array<double, 3> shift = {rng.normal(0, 10), rng.normal(0, 10),
                                             rng.normal(0, 10)};
        GeometryInput moved = in;
        for (auto& c : moved.coords) {
            std::array<double, 3> r{};
            for (int i = 0; i < 3; ++i)
                r[i] = rot[i][0] * c[0] + rot[i][1] * c[1] + rot[i][2] * c[2] + shift[i];
            c = r;
        }
        auto after = encode_geometry(tape, moved, geo);
        for (size_t i = 0; i < base->data.size(); ++i)
            CHECK(std::fabs(base->data[i] - after->data[i]) < 1e-9);
    }
}

TEST_CASE("encode_geometry rejects bad input") {
    ParamRegistry reg;
    auto geo = build_geometry(reg, 8, 23);
    Tape tape;
    GeometryInput empty;
    CHECK_THROWS_AS(encode_geometry(tape, empty, geo), PreconditionError);
    GeometryInput nan_in;
    nan_in.coords.push_back({0.0, std::nan(""), 0.0});
    nan_in.residue_tokens.push_back(0);
    CHECK_THROWS_AS(encode_geometry(tape, nan_in, geo), NumericError);
}

TEST_CASE("lora and featurizer parameters pass gradient checks") {
    ParamRegistry reg;
    auto bb = micro_backbone(reg, 6, 2);
    auto geo = build_geometry(reg, 6, 19);
    // non-zero up so the adapter contributes to the loss surface
    Rng rng(3);
    for (auto& layer : bb.layers) {
        for (auto& v : layer.lora_q.up->data) v = rng.normal(0, 0.1);
        for (auto& v : layer.lora_v.up->data) v = rng.normal(0, 0.1);
    }
    auto tokens = vocab::tokenize_enzyme("MKVL");
    GeometryInput gin;
    for (int i = 0; i < 3; ++i) {
        gin.coords.push_back({rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)});
        gin.residue_tokens.push_back(tokens[i]);
    }
    auto loss_fn = [&](Tape& t) {
        auto he = encode_enzyme(t, tokens, bb, DropoutCtx::off());
        auto hg = encode_geometry(t, gin, geo);
        return t.add(t.sum_sq(he), t.sum_sq(hg));
    };
    std::vector<TensorPtr> params;
    for (const auto& e : reg.entries())
        if (!e.frozen) params.push_back(e.tensor);
    for (const auto& rep : grad_check(loss_fn, params)) {
        INFO(rep.param);
        CHECK(rep.max_rel_error < 1e-4);
    }
}
