#pragma once

#include <map>
#include <string>
#include <vector>

#include "tsrank/dataset.hpp"
#include "tsrank/meta.hpp"
#include "tsrank/model_encoder.hpp"
#include "tsrank/rng.hpp"

namespace tsrank {

enum class ModelFamily { linear_ar, windowed_mlp, seasonal_mean };

// A small forecaster standing in for one hub model. Frozen feature extractor
// plus a linear one-step head; multi-step forecasts are produced recursively,
// so family capacity vs. horizon genuinely shapes the oracle rankings.
struct SyntheticModel {
    std::string id;
    ModelFamily family = ModelFamily::linear_ar;
    int receptive = 8;  // lags consumed per step
    int period = 0;     // seasonal_mean only
    int hidden = 0;     // windowed_mlp only
    std::vector<double> w1, b1;  // frozen random features (windowed_mlp)
    std::vector<double> head;    // feature_dim() coefficients, incl. bias

    int feature_dim() const;
    // features from the last `receptive` values ending at hist[len-1]
    std::vector<double> features(const double* hist, int len) const;
    std::vector<double> forecast(const std::vector<double>& history, int horizon) const;
};

struct OracleBudget {
    int max_train_windows = 192;
    int max_test_windows = 64;
    double ridge_lambda = 1e-6;  // fallback for singular normal equations
};

// Cheap adaptation oracle: channel-standardize, least-squares refit of each
// model's final linear head on the train split, score by test-split MSE over
// sliding windows, then min-max normalize across the hub.
MetaSample oracle_ground_truth(const std::vector<SyntheticModel>& hub,
                               const TimeSeriesDataset& dataset, int horizon,
                               const OracleBudget& budget = {},
                               ScoreNormalization mode = ScoreNormalization::min_max);

struct SyntheticWorld {
    std::vector<TimeSeriesDataset> datasets;
    std::vector<SyntheticModel> hub;
    std::vector<ModelCard> cards;
    std::vector<MetaSample> meta;
};

SyntheticWorld generate_synthetic_world(std::uint64_t seed, int n_datasets, int k_models,
                                        const std::vector<int>& horizons,
                                        const OracleBudget& budget = {});

// hub construction without the oracle pass (used by generate_synthetic_world)
std::vector<SyntheticModel> make_hub(std::uint64_t seed, int k_models);
std::vector<ModelCard> make_cards(const std::vector<SyntheticModel>& hub);
TimeSeriesDataset make_dataset(std::uint64_t seed, int index, int length);

}  // namespace tsrank
