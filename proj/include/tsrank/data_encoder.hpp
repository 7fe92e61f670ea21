#pragma once

#include <vector>

#include "tsrank/dataset.hpp"
#include "tsrank/param_store.hpp"
#include "tsrank/rng.hpp"
#include "tsrank/tensor.hpp"

namespace tsrank {

struct EncoderConfig {
    int look_back = 96;   // L
    int patch_size = 16;  // S
    int d = 64;
    int subset_size = 32;      // B
    int infer_resamples = 8;   // M
    int patches() const { return look_back / patch_size; }
};

// B univariate z-normalized windows drawn from the train split, row-major B x L.
std::vector<real> sample_subset(const TimeSeriesDataset& dataset, int look_back, int subset_size,
                                Rng& rng);

// non-overlapping patches; trailing remainder dropped. Output: per window, a
// P x S matrix (flattened to one (B*P) x S block for batched projection).
std::vector<real> patchify(const std::vector<real>& windows, int subset_size, int look_back,
                           int patch_size);

// sinusoidal positional table, P x d
Ten positional_encoding(int patches, int d);

// register the encoder parameters: enc.patch_proj (S x d), enc.wq/wk/wv (d x d)
void init_data_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng);

// E_d = mean over B windows of self-attended patch embeddings, P x d.
Ten encode_data(const std::vector<real>& subset, const ParamStore& params,
                const EncoderConfig& cfg);

}  // namespace tsrank
