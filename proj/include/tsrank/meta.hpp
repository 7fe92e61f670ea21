#pragma once

#include <string>
#include <vector>

#include "tsrank/rng.hpp"

namespace tsrank {

enum class Provenance { oracle, external };

// One training record: how the whole hub performed on (dataset, horizon).
struct MetaSample {
    std::string dataset_id;
    int horizon = 0;
    std::vector<double> scores;  // length K, in [0, 1], higher is better
    Provenance provenance = Provenance::oracle;
};

enum class SamplingStrategy { cross_dataset, cross_horizon };

struct Task {
    std::vector<MetaSample> support;
    std::vector<MetaSample> query;
    SamplingStrategy strategy = SamplingStrategy::cross_dataset;
};

enum class ScoreNormalization { min_max, rank_based };

// errors -> scores in [0,1]; best model 1.0, worst 0.0; all-equal case pinned
// to 0.5 throughout.
std::vector<double> normalize_scores(const std::vector<double>& errors,
                                     ScoreNormalization mode = ScoreNormalization::min_max);

struct MetaSplit {
    std::vector<MetaSample> train, val, test;
    std::vector<std::string> test_datasets, val_datasets, train_datasets;
};

// Held-out datasets go entirely to test; the rest split ~8:1 by dataset.
MetaSplit split_meta(const std::vector<MetaSample>& meta, int holdout_count, std::uint64_t seed);

std::vector<Task> sample_tasks(const std::vector<MetaSample>& meta_train,
                               SamplingStrategy strategy, int n_tasks, int support_size,
                               int query_size, Rng& rng);

// meta-dataset JSON file
void save_meta_dataset(const std::vector<MetaSample>& samples,
                       const std::vector<std::string>& hub_ids, const std::string& path);
std::vector<MetaSample> load_meta_dataset(const std::string& path,
                                          std::vector<std::string>* hub_ids = nullptr);

}  // namespace tsrank
