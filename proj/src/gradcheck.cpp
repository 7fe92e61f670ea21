#include "tsrank/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tsrank/data_encoder.hpp"
#include "tsrank/model_encoder.hpp"
#include "tsrank/param_store.hpp"
#include "tsrank/rng.hpp"
#include "tsrank/scorer.hpp"
#include "tsrank/tensor.hpp"
#include "tsrank/trainer.hpp"

namespace tsrank {
namespace {

std::vector<real> randn_vec(std::size_t n, Rng& rng, real sd) {
    std::vector<real> v(n);
    for (auto& x : v) x = rng.normal(0, sd);
    return v;
}

// relu with a deliberately wrong derivative (passes gradient through the
// negative side too); used only as a negative control.
Ten buggy_relu(const Ten& x) {
    auto out = tensor(x->shape, x->data);
    for (auto& v : out->data) v = std::max(real(0), v);
    out->requires_grad = x->requires_grad;
    out->parents = {x};
    Ten xin = x;
    out->backprop = [xin](TensorNode& self) {
        xin->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xin->grad[i] += self.grad[i];
    };
    return out;
}

struct Probe {
    std::string name;
    // builds fresh inputs + params for instance i and returns the loss closure
    std::function<std::function<Ten(ParamStore&)>(std::uint64_t seed, ParamStore& params)> make;
};

ScorerConfig tiny_scorer() {
    ScorerConfig sc;
    sc.d = 8;
    sc.experts = 2;
    sc.expert_hidden = 6;
    sc.router_hidden = 4;
    return sc;
}

EncoderConfig tiny_encoder() {
    EncoderConfig ec;
    ec.look_back = 16;
    ec.patch_size = 8;
    ec.d = 8;
    ec.subset_size = 2;
    return ec;
}

std::vector<Probe> build_probes(bool inject_bug) {
    std::vector<Probe> probes;

    probes.push_back({"matmul", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        p.add_randn("a", {3, 4}, rng, 0.7);
        p.add_randn("b", {4, 2}, rng, 0.7);
        p.add_randn("bias", {1, 2}, rng, 0.5);
        return [](ParamStore& q) {
            return sum_all(relu(add_rowvec(matmul(q.get("a"), q.get("b")), q.get("bias"))));
        };
    }});

    probes.push_back({"softmax", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        p.add_randn("x", {3, 5}, rng, 1.0);
        auto w = tensor({3, 5}, randn_vec(15, rng, 1.0));
        return [w](ParamStore& q) {
            auto s0 = softmax(q.get("x"), 1);
            auto s1 = softmax(q.get("x"), 0);
            return sum_all(add(mul(s0, w), mul(s1, w)));
        };
    }});

    probes.push_back({"attention", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        p.add_randn("q", {3, 4}, rng, 0.8);
        p.add_randn("k", {5, 4}, rng, 0.8);
        p.add_randn("v", {5, 4}, rng, 0.8);
        return [](ParamStore& q) {
            return sum_all(gelu(scaled_dot_attention(q.get("q"), q.get("k"), q.get("v"))));
        };
    }});

    probes.push_back({"mlp", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        p.add_randn("w1", {4, 6}, rng, 0.6);
        p.add_randn("b1", {1, 6}, rng, 0.3);
        p.add_randn("w2", {6, 2}, rng, 0.6);
        p.add_randn("b2", {1, 2}, rng, 0.3);
        auto x = tensor({3, 4}, randn_vec(12, rng, 1.0));
        return [x](ParamStore& q) {
            return mean_all(mlp_forward(x, q.get("w1"), q.get("b1"), q.get("w2"), q.get("b2"),
                                        Activation::gelu));
        };
    }});

    probes.push_back({"data_encoder", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        auto ec = tiny_encoder();
        init_data_encoder_params(p, ec, rng);
        std::vector<real> subset =
            randn_vec(static_cast<std::size_t>(ec.subset_size) * ec.look_back, rng, 1.0);
        return [subset, ec](ParamStore& q) { return sum_all(encode_data(subset, q, ec)); };
    }});

    probes.push_back({"model_embedding", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        p.add_randn("model_enc.wm", {10, 8}, rng, 0.5);
        auto feats = tensor({3, 10}, randn_vec(30, rng, 1.0));
        return [feats](ParamStore& q) {
            return sum_all(relu(matmul(feats, q.get("model_enc.wm"))));
        };
    }});

    probes.push_back({"scorer", [](std::uint64_t seed, ParamStore& p) {
        Rng rng(seed);
        auto sc = tiny_scorer();
        init_scorer_params(p, sc, rng);
        auto e_m = tensor({4, sc.d}, randn_vec(4 * sc.d, rng, 0.8));
        auto e_d = tensor({3, sc.d}, randn_vec(3 * sc.d, rng, 0.8));
        return [e_m, e_d, sc](ParamStore& q) {
            auto res = score_hub(e_m, e_d, 192, q, sc);
            return sum_all(res.scores);
        };
    }});

    auto full_loss = [](LossOrientation orient) {
        return [orient](std::uint64_t seed, ParamStore& p) {
            Rng rng(seed);
            auto ec = tiny_encoder();
            auto sc = tiny_scorer();
            init_data_encoder_params(p, ec, rng);
            init_scorer_params(p, sc, rng);
            p.add_randn("model_enc.wm", {12, sc.d}, rng, 0.5);
            auto feats = tensor({4, 12}, randn_vec(48, rng, 1.0));
            std::vector<real> subset =
                randn_vec(static_cast<std::size_t>(ec.subset_size) * ec.look_back, rng, 1.0);
            std::vector<double> truth = {0.9, 0.1, 0.55, 1.0};
            return std::function<Ten(ParamStore&)>(
                [feats, subset, truth, ec, sc, orient](ParamStore& q) {
                    auto e_m = relu(matmul(feats, q.get("model_enc.wm")));
                    auto e_d = encode_data(subset, q, ec);
                    auto res = score_hub(e_m, e_d, 336, q, sc);
                    return total_loss(res.scores, truth, 0.7, orient);
                });
        };
    };
    probes.push_back({"loss_listwise", full_loss(LossOrientation::listwise)});
    probes.push_back({"loss_cross_entropy", full_loss(LossOrientation::cross_entropy)});

    if (inject_bug) {
        probes.push_back({"negative_control", [](std::uint64_t seed, ParamStore& p) {
            Rng rng(seed);
            p.add_randn("a", {3, 4}, rng, 0.7);
            p.add_randn("b", {4, 2}, rng, 0.7);
            return [](ParamStore& q) {
                return sum_all(buggy_relu(matmul(q.get("a"), q.get("b"))));
            };
        }});
    }
    return probes;
}

}  // namespace

std::vector<GradCheckRow> gradcheck_all(const std::string& component_filter, bool inject_bug,
                                        int instances, double tolerance) {
    std::vector<GradCheckRow> rows;
    for (const auto& probe : build_probes(inject_bug)) {
        if (!component_filter.empty() && probe.name != component_filter) continue;
        GradCheckRow row;
        row.component = probe.name;
        for (int i = 0; i < instances; ++i) {
            ParamStore params;
            std::uint64_t seed = fnv1a(probe.name + "/" + std::to_string(i), 0x67726164ull);
            auto f = probe.make(seed, params);
            auto errs = grad_check(f, params, 1e-4);
            for (const auto& [name, err] : errs) row.max_rel_error = std::max(row.max_rel_error, err);
        }
        row.passed = row.max_rel_error < tolerance;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace tsrank
