#include "tsrank/scorer.hpp"

#include <cmath>
#include <string>

namespace tsrank {

void init_scorer_params(ParamStore& params, const ScorerConfig& cfg, Rng& rng) {
    const real sd = real(1) / std::sqrt(static_cast<real>(cfg.d));
    params.add_randn("scorer.wq", {cfg.d, cfg.d}, rng, sd);
    params.add_randn("scorer.wk", {cfg.d, cfg.d}, rng, sd);
    params.add_randn("scorer.wv", {cfg.d, cfg.d}, rng, sd);
    params.add_randn("router.w1", {2, cfg.router_hidden}, rng, real(0.5));
    params.add("router.b1", {1, cfg.router_hidden},
               std::vector<real>(static_cast<std::size_t>(cfg.router_hidden), real(0)));
    params.add_randn("router.w2", {cfg.router_hidden, cfg.experts}, rng,
                     real(1) / std::sqrt(static_cast<real>(cfg.router_hidden)));
    params.add("router.b2", {1, cfg.experts},
               std::vector<real>(static_cast<std::size_t>(cfg.experts), real(0)));
    for (int g = 0; g < cfg.experts; ++g) {
        const std::string p = "expert" + std::to_string(g);
        params.add_randn(p + ".w1", {cfg.d, cfg.expert_hidden}, rng, sd);
        params.add(p + ".b1", {1, cfg.expert_hidden},
                   std::vector<real>(static_cast<std::size_t>(cfg.expert_hidden), real(0)));
        params.add_randn(p + ".w2", {cfg.expert_hidden, 1}, rng,
                         real(1) / std::sqrt(static_cast<real>(cfg.expert_hidden)));
        params.add(p + ".b2", {1, 1}, {real(0)});
    }
}

CrossAttention cross_attention(const Ten& e_m, const Ten& e_d, const ParamStore& params) {
    if (e_m->cols() != e_d->cols())
        throw ShapeError("cross_attention embedding width mismatch: " + e_m->shape_str() + " vs " +
                         e_d->shape_str());
    Ten q = matmul(e_m, params.get("scorer.wq"));
    Ten k = matmul(e_d, params.get("scorer.wk"));
    Ten v = matmul(e_d, params.get("scorer.wv"));
    // same composition as scaled_dot_attention, with the attention matrix retained
    const int d = q->cols();
    Ten kt = [&] {
        std::vector<real> t(k->size());
        for (int i = 0; i < k->rows(); ++i)
            for (int j = 0; j < k->cols(); ++j)
                t[static_cast<std::size_t>(j) * k->rows() + i] = k->at(i, j);
        Ten out = tensor({k->cols(), k->rows()}, std::move(t));
        out->parents = {k};
        out->backprop = [](TensorNode& n) {
            const Ten& k = n.parents[0];
            k->ensure_grad();
            for (int i = 0; i < n.rows(); ++i)
                for (int j = 0; j < n.cols(); ++j)
                    k->grad[static_cast<std::size_t>(j) * n.rows() + i] +=
                        n.grad[static_cast<std::size_t>(i) * n.cols() + j];
        };
        return out;
    }();
    Ten attn = softmax(scale(matmul(q, kt), real(1) / std::sqrt(static_cast<real>(d))), 1);
    return {matmul(attn, v), attn};
}

Ten router_weights(int horizon, const ParamStore& params, const ScorerConfig& cfg) {
    if (horizon < 1) throw ValueError("horizon must be >= 1");
    const real h = static_cast<real>(horizon);
    Ten features = tensor({1, 2}, {h / real(720), std::log(h) / std::log(real(720))});
    Ten logits = mlp_forward(features, params.get("router.w1"), params.get("router.b1"),
                             params.get("router.w2"), params.get("router.b2"), Activation::relu);
    (void)cfg;
    return softmax(logits, 1);
}

Ten expert_scores(const Ten& e_ca, const Ten& weights, const ParamStore& params,
                  const ScorerConfig& cfg) {
    if (weights->size() != static_cast<std::size_t>(cfg.experts))
        throw ShapeError("expert weight count mismatch");
    std::vector<Ten> mixed;
    for (int g = 0; g < cfg.experts; ++g) {
        const std::string p = "expert" + std::to_string(g);
        Ten s = mlp_forward(e_ca, params.get(p + ".w1"), params.get(p + ".b1"),
                            params.get(p + ".w2"), params.get(p + ".b2"), Activation::relu);
        mixed.push_back(scale_by(s, get_element(weights, g)));
    }
    return add_n(mixed);
}

ScoreResult score_hub(const Ten& hub_embedding, const Ten& data_embedding, int horizon,
                      const ParamStore& params, const ScorerConfig& cfg) {
    CrossAttention ca = cross_attention(hub_embedding, data_embedding, params);
    Ten w = router_weights(horizon, params, cfg);
    ScoreResult res;
    res.scores = expert_scores(ca.e_ca, w, params, cfg);
    res.expert_weights = w;
    res.attention = ca.attention->data;
    res.attention_rows = ca.attention->rows();
    res.attention_cols = ca.attention->cols();
    return res;
}

}  // namespace tsrank
