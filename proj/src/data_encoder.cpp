#include "tsrank/data_encoder.hpp"

#include <algorithm>
#include <cmath>

namespace tsrank {

std::vector<real> sample_subset(const TimeSeriesDataset& dataset, int look_back, int subset_size,
                                Rng& rng) {
    const int train_end = dataset.train_end();
    std::vector<int> channels;
    for (int c = 0; c < dataset.cols; ++c)
        if (train_end >= look_back) channels.push_back(c);
    if (channels.empty() || train_end < look_back)
        throw ValueError("dataset '" + dataset.id + "' has no channel with " +
                         std::to_string(look_back) + " contiguous train points");
    const int max_start = train_end - look_back;
    std::vector<real> out(static_cast<std::size_t>(subset_size) * look_back);
    for (int b = 0; b < subset_size; ++b) {
        const int c = channels[static_cast<std::size_t>(rng.uniform_int(0, channels.size() - 1))];
        const int s = static_cast<int>(rng.uniform_int(0, max_start));
        double mean = 0;
        for (int i = 0; i < look_back; ++i) mean += dataset.at(s + i, c);
        mean /= look_back;
        double var = 0;
        for (int i = 0; i < look_back; ++i) {
            const double d = dataset.at(s + i, c) - mean;
            var += d * d;
        }
        const double sd = std::max(std::sqrt(var / look_back), 1e-8);
        for (int i = 0; i < look_back; ++i)
            out[static_cast<std::size_t>(b) * look_back + i] =
                static_cast<real>((dataset.at(s + i, c) - mean) / sd);
    }
    return out;
}

std::vector<real> patchify(const std::vector<real>& windows, int subset_size, int look_back,
                           int patch_size) {
    if (patch_size > look_back) throw ShapeError("patch size exceeds look-back");
    const int p = look_back / patch_size;
    std::vector<real> out(static_cast<std::size_t>(subset_size) * p * patch_size);
    for (int b = 0; b < subset_size; ++b)
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < patch_size; ++j)
                out[(static_cast<std::size_t>(b) * p + i) * patch_size + j] =
                    windows[static_cast<std::size_t>(b) * look_back + i * patch_size + j];
    return out;
}

Ten positional_encoding(int patches, int d) {
    if (d % 2 != 0) throw ShapeError("positional encoding needs even d");
    std::vector<real> pe(static_cast<std::size_t>(patches) * d);
    for (int p = 0; p < patches; ++p) {
        for (int i = 0; i < d / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / d);
            pe[static_cast<std::size_t>(p) * d + 2 * i] = static_cast<real>(std::sin(p * freq));
            pe[static_cast<std::size_t>(p) * d + 2 * i + 1] = static_cast<real>(std::cos(p * freq));
        }
    }
    return tensor({patches, d}, std::move(pe));
}

void init_data_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng) {
    params.add_randn("enc.patch_proj", {cfg.patch_size, cfg.d}, rng,
                     real(1) / std::sqrt(static_cast<real>(cfg.patch_size)));
    const real sd = real(1) / std::sqrt(static_cast<real>(cfg.d));
    params.add_randn("enc.wq", {cfg.d, cfg.d}, rng, sd);
    params.add_randn("enc.wk", {cfg.d, cfg.d}, rng, sd);
    params.add_randn("enc.wv", {cfg.d, cfg.d}, rng, sd);
}

Ten encode_data(const std::vector<real>& subset, const ParamStore& params,
                const EncoderConfig& cfg) {
    const int b = cfg.subset_size;
    const int p = cfg.patches();
    if (static_cast<int>(subset.size()) != b * cfg.look_back)
        throw ShapeError("subset size does not match config: got " +
                         std::to_string(subset.size()) + " values, expected " +
                         std::to_string(b * cfg.look_back));
    Ten wp = params.get("enc.patch_proj");
    Ten wq = params.get("enc.wq");
    Ten wk = params.get("enc.wk");
    Ten wv = params.get("enc.wv");
    if (wp->rows() != cfg.patch_size || wp->cols() != cfg.d)
        throw ShapeError("enc.patch_proj must be " + std::to_string(cfg.patch_size) + "x" +
                         std::to_string(cfg.d) + ", got " + wp->shape_str());

    // batch the patch projection and Q/K/V projections over all B windows
    Ten patches = tensor({b * p, cfg.patch_size}, patchify(subset, b, cfg.look_back, cfg.patch_size));
    Ten e_patch = matmul(patches, wp);  // (B*P) x d
    Ten pos = positional_encoding(p, cfg.d);
    Ten e_inp = [&] {
        // add positional table to every window block
        std::vector<real> tiled(static_cast<std::size_t>(b * p) * cfg.d);
        for (int w = 0; w < b; ++w)
            std::copy(pos->data.begin(), pos->data.end(),
                      tiled.begin() + static_cast<std::size_t>(w) * p * cfg.d);
        return add(e_patch, tensor({b * p, cfg.d}, std::move(tiled)));
    }();
    Ten q = matmul(e_inp, wq);
    Ten k = matmul(e_inp, wk);
    Ten v = matmul(e_inp, wv);

    // per-window self-attention over the P patch positions, then mean over B
    std::vector<Ten> per_window;
    per_window.reserve(static_cast<std::size_t>(b));
    for (int w = 0; w < b; ++w) {
        Ten qw = slice_rows(q, w * p, p);
        Ten kw = slice_rows(k, w * p, p);
        Ten vw = slice_rows(v, w * p, p);
        per_window.push_back(scaled_dot_attention(qw, kw, vw));
    }
    return scale(add_n(per_window), real(1) / static_cast<real>(b));
}

}  // namespace tsrank
