#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "tsrank/model_encoder.hpp"
#include "tsrank/synth.hpp"

using namespace tsrank;

namespace {

ModelCard basic_card(const std::string& id, Architecture arch) {
    ModelCard c;
    c.id = id;
    c.architecture = arch;
    c.param_count = 1000000;
    c.gmacs = 0.5;
    c.hidden_dim = 64;
    c.pretrain_domains = {"energy", "general"};
    c.dag.nodes = {{"in", "input"}, {"core", "linear"}, {"out", "head"}};
    c.dag.edges = {{"in", "core"}, {"core", "out"}};
    return c;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("meta_embeddings: one-hots, log-scaled capacities, domain multi-hot") {
    ModelEncoderConfig cfg;
    cfg.hub_znorm = false;  // inspect raw values

    auto a = basic_card("a", Architecture::encoder_only);
    auto b = basic_card("b", Architecture::decoder_only);
    auto c = basic_card("c", Architecture::encoder_decoder);
    b.param_count = 100000000;  // 100x a's parameter count
    auto rows = meta_embeddings({a, b, c}, cfg);
    REQUIRE(rows.size() == 3);
    REQUIRE(static_cast<int>(rows[0].size()) == cfg.d_a);

    CHECK(rows[0][0] == 1.0);  // encoder_only
    CHECK(rows[0][1] == 0.0);
    CHECK(rows[0][2] == 0.0);
    CHECK(rows[1][1] == 1.0);  // decoder_only
    CHECK(rows[2][2] == 1.0);  // encoder_decoder

    // 10^6 vs 10^8 parameters differ by exactly 2 decades in the log feature
    CHECK(rows[1][3] - rows[0][3] == doctest::Approx(2.0).epsilon(1e-12));

    // domain multi-hot follows the vocabulary order
    const auto& vocab = domain_vocabulary();
    for (std::size_t i = 0; i < vocab.size(); ++i)
        CHECK(rows[0][6 + i] == (a.pretrain_domains.count(vocab[i]) ? 1.0 : 0.0));

    SUBCASE("hub z-normalization centers the continuous columns") {
        ModelEncoderConfig zn;
        auto zr = meta_embeddings({a, b, c}, zn);
        for (int col = 3; col <= 5; ++col) {
            double mean = 0;
            for (const auto& r : zr) mean += r[col];
            CHECK(std::abs(mean) < 1e-12);
        }
    }
    SUBCASE("synthetic hub of 8 covers all three architectures 3/2/3") {
        auto cards = make_cards(make_hub(7, 8));
        auto r8 = meta_embeddings(cards, cfg);
        int counts[3] = {0, 0, 0};
        for (const auto& r : r8)
            for (int k = 0; k < 3; ++k) counts[k] += (r[k] == 1.0);
        CHECK(counts[0] == 3);
        CHECK(counts[1] == 2);
        CHECK(counts[2] == 3);
    }
    SUBCASE("unknown domain tag is rejected with the vocabulary listed") {
        auto bad = basic_card("bad", Architecture::encoder_only);
        bad.pretrain_domains = {"finanse"};
        CHECK_THROWS_WITH_AS(meta_embeddings({bad}, cfg), doctest::Contains("finanse"),
                             ValueError);
    }
}

TEST_CASE("wl_topo_embedding: normalization, isomorphism invariance, label sensitivity") {
    SUBCASE("single node gives a unit vector") {
        DagGraph g;
        g.nodes = {{"n0", "attention"}};
        auto v = wl_topo_embedding(g);
        double norm = 0;
        for (double x : v) norm += x * x;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("empty graph gives the zero vector") {
        auto v = wl_topo_embedding(DagGraph{});
        for (double x : v) CHECK(x == 0.0);
    }
    SUBCASE("100 random node-id relabelings leave the embedding unchanged") {
        DagGraph g;
        const std::vector<std::string> ops = {"embed", "attn", "attn", "mlp", "norm", "head"};
        for (int i = 0; i < 6; ++i) g.nodes.push_back({"n" + std::to_string(i), ops[i]});
        g.edges = {{"n0", "n1"}, {"n0", "n2"}, {"n1", "n3"}, {"n2", "n3"}, {"n3", "n4"}, {"n4", "n5"}};
        auto base = wl_topo_embedding(g);

        Rng rng(17);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<int> perm(6);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng.engine());
            DagGraph h;
            std::map<std::string, std::string> rename;
            for (int i = 0; i < 6; ++i) rename["n" + std::to_string(i)] = "x" + std::to_string(perm[i]);
            // also shuffle node declaration order
            for (int i = 5; i >= 0; --i) h.nodes.push_back({rename[g.nodes[i].id], g.nodes[i].op_label});
            for (const auto& [s, t] : g.edges) h.edges.emplace_back(rename[s], rename[t]);
            CHECK(wl_topo_embedding(h) == base);  // bitwise
        }
    }
    SUBCASE("reversing the labels along a chain changes the embedding") {
        DagGraph fwd, rev;
        const std::vector<std::string> ops = {"embed", "attn", "mlp", "head"};
        for (int i = 0; i < 4; ++i) {
            fwd.nodes.push_back({"n" + std::to_string(i), ops[i]});
            rev.nodes.push_back({"n" + std::to_string(i), ops[3 - i]});
        }
        for (int i = 0; i < 3; ++i) {
            fwd.edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(i + 1));
            rev.edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(i + 1));
        }
        CHECK(wl_topo_embedding(fwd) != wl_topo_embedding(rev));
    }
    SUBCASE("cycle is rejected and the witness node is named") {
        DagGraph g;
        g.nodes = {{"a", "x"}, {"b", "y"}, {"c", "z"}};
        g.edges = {{"a", "b"}, {"b", "c"}, {"c", "b"}};
        CHECK_THROWS_WITH_AS(wl_topo_embedding(g), doctest::Contains("cycle"), ValueError);
    }
    SUBCASE("duplicate node id and dangling edge are rejected") {
        DagGraph g;
        g.nodes = {{"a", "x"}, {"a", "y"}};
        CHECK_THROWS_AS(wl_topo_embedding(g), ValueError);
        DagGraph h;
        h.nodes = {{"a", "x"}};
        h.edges = {{"a", "ghost"}};
        CHECK_THROWS_AS(wl_topo_embedding(h), ValueError);
    }
}

TEST_CASE("probe signatures separate different dynamics and detect bad lengths") {
    ModelEncoderConfig cfg;
    auto ar_card = [&](double phi) {
        auto c = basic_card("ar", Architecture::decoder_only);
        c.forecaster = [phi](const std::vector<double>& hist, int h) {
            std::vector<double> out;
            double x = hist.back();
            for (int t = 0; t < h; ++t) out.push_back(x *= phi);
            return out;
        };
        return c;
    };
    auto fast = probe_signature(ar_card(0.1), cfg);
    auto slow = probe_signature(ar_card(0.9), cfg);
    REQUIRE(fast.size() == static_cast<std::size_t>(cfg.n_probe) * cfg.probe_horizon);
    CHECK(cosine(fast, slow) < 0.99);

    SUBCASE("identical forecasters produce identical signatures") {
        CHECK(probe_signature(ar_card(0.5), cfg) == probe_signature(ar_card(0.5), cfg));
    }
    SUBCASE("stored signature of the wrong length is rejected") {
        auto c = ar_card(0.5);
        c.probe_signature = std::vector<double>(7, 0.0);
        CHECK_THROWS_AS(probe_signature(c, cfg), ValueError);
    }
    SUBCASE("card with neither forecaster nor signature is rejected") {
        auto c = basic_card("empty", Architecture::encoder_only);
        CHECK_THROWS_AS(probe_signature(c, cfg), ValueError);
    }
}

TEST_CASE("encode_hub: shapes, zero projection, duplicates, per-row independence") {
    ModelEncoderConfig cfg;
    auto cards = make_cards(make_hub(7, 8));
    const int feat = cfg.d_a + cfg.d_t + cfg.d_c;

    ParamStore params;
    Rng rng(41);
    params.add_randn("model_enc.wm", {feat, cfg.d}, rng, real(0.1));
    auto hub = encode_hub(cards, params, cfg);
    CHECK(hub.e_m->rows() == 8);
    CHECK(hub.e_m->cols() == cfg.d);
    CHECK(hub.model_ids.size() == 8);
    CHECK(hub.v_a.size() == 8);
    CHECK(hub.v_t.size() == 8);
    CHECK(hub.v_c.size() == 8);

    SUBCASE("zero W_m maps every model to the zero embedding") {
        ParamStore zp;
        zp.add("model_enc.wm", {feat, cfg.d},
               std::vector<real>(static_cast<std::size_t>(feat) * cfg.d, real(0)));
        auto z = encode_hub(cards, zp, cfg);
        for (real v : z.e_m->data) CHECK(v == 0.0);
    }
    SUBCASE("duplicating one card duplicates its embedding row bitwise") {
        auto dup = cards;
        dup.push_back(cards[2]);
        dup.back().id = "copy-of-2";
        auto h2 = encode_hub(dup, params, cfg);
        for (int j = 0; j < cfg.d; ++j) CHECK(h2.e_m->at(8, j) == h2.e_m->at(2, j));
    }
    SUBCASE("without hub normalization each row depends only on its own card") {
        ModelEncoderConfig solo = cfg;
        solo.hub_znorm = false;
        auto full = encode_hub(cards, params, solo);
        for (int i = 0; i < 8; ++i) {
            auto one = encode_hub({cards[i]}, params, solo);
            for (int j = 0; j < cfg.d; ++j) CHECK(one.e_m->at(0, j) == full.e_m->at(i, j));
        }
    }
    SUBCASE("projection gradients match finite differences") {
        auto errs = grad_check(
            [&](ParamStore& ps) { return sum_all(encode_hub(cards, ps, cfg).e_m); }, params,
            1e-4);
        REQUIRE(errs.count("model_enc.wm") == 1);
        CHECK(errs["model_enc.wm"] < 1e-6);
    }
    SUBCASE("wrong W_m shape throws") {
        ParamStore bad;
        Rng r2(43);
        bad.add_randn("model_enc.wm", {feat - 1, cfg.d}, r2, real(0.1));
        CHECK_THROWS_AS(encode_hub(cards, bad, cfg), ShapeError);
    }
}

TEST_CASE("model card JSON round-trip preserves every serialized field") {
    auto cards = make_cards(make_hub(13, 3));
    ModelEncoderConfig cfg;
    for (auto& c : cards) c.probe_signature = probe_signature(c, cfg);

    const auto path = (std::filesystem::temp_directory_path() / "tsrank_card.json").string();
    for (const auto& c : cards) {
        model_card_to_json_file(c, path);
        auto back = model_card_from_json_file(path);
        CHECK(back.id == c.id);
        CHECK(back.architecture == c.architecture);
        CHECK(back.param_count == c.param_count);
        CHECK(back.gmacs == c.gmacs);
        CHECK(back.hidden_dim == c.hidden_dim);
        CHECK(back.pretrain_domains == c.pretrain_domains);
        REQUIRE(back.dag.nodes.size() == c.dag.nodes.size());
        for (std::size_t i = 0; i < c.dag.nodes.size(); ++i) {
            CHECK(back.dag.nodes[i].id == c.dag.nodes[i].id);
            CHECK(back.dag.nodes[i].op_label == c.dag.nodes[i].op_label);
        }
        CHECK(back.dag.edges == c.dag.edges);
        REQUIRE(back.probe_signature.has_value());
        CHECK(*back.probe_signature == *c.probe_signature);  // exact doubles via JSON
        // a reloaded card has no forecaster but its signature still embeds
        CHECK(probe_signature(back, cfg) == *c.probe_signature);
    }
    std::filesystem::remove(path);
}
