#pragma once

#include <string>
#include <vector>

#include "tsrank/tensor.hpp"

namespace tsrank {

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One downstream dataset: L_total x C observations plus split fractions.
struct TimeSeriesDataset {
    std::string id;
    std::string domain;
    std::string frequency;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major
    int split_train = 6, split_val = 2, split_test = 2;  // fractions as integer ratio

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }

    int train_end() const;
    int val_end() const;

    // contiguous slice of one channel: [first, first+len)
    std::vector<double> window(int channel, int first, int len) const;
};

struct LoadOptions {
    bool forward_fill = false;    // impute missing cells from the previous row
    bool allow_constant = false;  // keep constant columns instead of rejecting
    int min_rows = 0;             // typically L + H
};

// Wide CSV: header row of channel names, one row per time step, optional
// leading timestamp column (ignored for math).
TimeSeriesDataset load_dataset(const std::string& path, const LoadOptions& opts = {});

void save_dataset_csv(const TimeSeriesDataset& ds, const std::string& path);

}  // namespace tsrank
