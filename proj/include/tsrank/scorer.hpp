#pragma once

#include <vector>

#include "tsrank/param_store.hpp"
#include "tsrank/tensor.hpp"

namespace tsrank {

struct ScorerConfig {
    int d = 64;
    int experts = 4;        // G
    int expert_hidden = 128;
    int router_hidden = 16;
};

struct ScoreResult {
    Ten scores;                      // K x 1, differentiable
    Ten expert_weights;              // 1 x G, differentiable
    std::vector<real> attention;     // K x P snapshot for export
    int attention_rows = 0, attention_cols = 0;
};

// register scorer.wq/wk/wv, router.*, expert<g>.* parameters
void init_scorer_params(ParamStore& params, const ScorerConfig& cfg, Rng& rng);

struct CrossAttention {
    Ten e_ca;       // K x d
    Ten attention;  // K x P, retained for export
};
CrossAttention cross_attention(const Ten& e_m, const Ten& e_d, const ParamStore& params);

// horizon featurized as [H/720, ln H / ln 720], softmaxed router output, 1 x G
Ten router_weights(int horizon, const ParamStore& params, const ScorerConfig& cfg);

// r_hat = sum_g w_g * MLP_g(E_ca), each expert mapping d -> 1 row-wise
Ten expert_scores(const Ten& e_ca, const Ten& weights, const ParamStore& params,
                  const ScorerConfig& cfg);

ScoreResult score_hub(const Ten& hub_embedding, const Ten& data_embedding, int horizon,
                      const ParamStore& params, const ScorerConfig& cfg);

}  // namespace tsrank
