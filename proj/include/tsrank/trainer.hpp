#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsrank/data_encoder.hpp"
#include "tsrank/dataset.hpp"
#include "tsrank/meta.hpp"
#include "tsrank/model_encoder.hpp"
#include "tsrank/param_store.hpp"
#include "tsrank/scorer.hpp"

namespace tsrank {

enum class LossOrientation { listwise, cross_entropy };

struct ModelConfig {
    EncoderConfig encoder;
    ScorerConfig scorer;
    ModelEncoderConfig model_enc;
};

struct TrainConfig {
    double lambda = 0.7;
    double alpha = 0.001;   // inner-loop lr (plain SGD)
    double gamma = 0.005;   // outer-loop lr (Adam)
    int inner_steps = 1;
    int n_tasks = 4;
    int support_size = 4;
    int query_size = 4;
    int epochs = 80;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool meta_learning = true;
    LossOrientation orientation = LossOrientation::listwise;
    int holdout_count = 3;
};

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
    std::vector<double> val_tau_w;
    double best_val_tau_w = 0;
    int best_epoch = -1;
    double wall_seconds = 0;
    std::string checkpoint_path;
};

// Joint objective: listwise ranking term over softmax-normalized score
// vectors plus lambda-weighted squared error. `listwise` keeps the predicted
// distribution outside the log; `cross_entropy` is the usual orientation.
Ten total_loss(const Ten& predicted, const std::vector<double>& truth, double lambda,
               LossOrientation orientation);

// --- first-order meta-learning over opaque loss closures ---------------------

using LossFn = std::function<Ten(const ParamStore&)>;

struct GenericTask {
    LossFn support_loss;
    LossFn query_loss;
};

// theta' = theta - alpha * grad(support loss), `steps` times; theta untouched.
ParamStore inner_adapt(const ParamStore& params, const LossFn& support_loss, double alpha,
                       int steps);

// FOMAML: accumulate query gradients at the adapted parameters across tasks
// (fixed task order), then one Adam step on theta. Returns mean query loss.
double meta_step(ParamStore& params, const std::vector<GenericTask>& tasks, double alpha,
                 int inner_steps, AdamState& adam, double gamma);

// --- full pipeline -----------------------------------------------------------

struct HubContext {
    Ten features;  // K x (d_a + d_t + d_c), constant
    std::vector<std::string> ids;
};

HubContext build_hub_context(const std::vector<ModelCard>& cards, const ModelEncoderConfig& cfg);
Ten hub_embedding(const HubContext& hub, const ParamStore& params);

ParamStore init_params(const ModelConfig& cfg, int hub_size, std::uint64_t seed);

ScoreResult score_sample(const std::vector<real>& subset, int horizon, const HubContext& hub,
                         const ParamStore& params, const ModelConfig& cfg);

Ten sample_loss(const std::vector<real>& subset, const MetaSample& sample, const HubContext& hub,
                const ParamStore& params, const ModelConfig& cfg, const TrainConfig& tc);

struct RankResult {
    std::vector<double> scores;       // averaged-E_d scores
    std::vector<int> order;           // descending
    std::vector<double> resample_sd;  // per-model sd of scores across the M resamples
    std::vector<real> attention;      // K x P from the averaged pass
    int attention_rows = 0, attention_cols = 0;
    std::vector<double> expert_weights;
};

RankResult rank_models(const ParamStore& params, const TimeSeriesDataset& dataset, int horizon,
                       const HubContext& hub, const ModelConfig& cfg, Rng& rng);

struct TrainOutput {
    ParamStore best_params;
    TrainReport report;
};

TrainOutput train(const std::map<std::string, TimeSeriesDataset>& datasets,
                  const std::vector<MetaSample>& meta_train,
                  const std::vector<MetaSample>& meta_val, const HubContext& hub,
                  const ModelConfig& cfg, const TrainConfig& tc);

// mean weighted tau over a partition with the given parameters
double evaluate_mean_tau_w(const ParamStore& params,
                           const std::map<std::string, TimeSeriesDataset>& datasets,
                           const std::vector<MetaSample>& partition, const HubContext& hub,
                           const ModelConfig& cfg, std::uint64_t seed);

}  // namespace tsrank
