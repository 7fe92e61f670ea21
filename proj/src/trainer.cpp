#include "tsrank/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tsrank/metrics.hpp"

namespace tsrank {

Ten total_loss(const Ten& predicted, const std::vector<double>& truth, double lambda,
               LossOrientation orientation) {
    if (predicted->size() != truth.size())
        throw ShapeError("total_loss length mismatch: " + std::to_string(predicted->size()) +
                         " vs " + std::to_string(truth.size()));
    if (truth.size() < 2) throw ValueError("total_loss needs K >= 2");
    const int k = static_cast<int>(truth.size());
    Ten r = tensor({1, k}, std::vector<real>(truth.begin(), truth.end()));
    Ten r_hat = tensor({1, k}, predicted->data);
    r_hat->parents = {predicted};
    r_hat->backprop = [](TensorNode& t) {
        t.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) t.parents[0]->grad[i] += t.grad[i];
    };
    Ten p = softmax(r_hat, 1);

    Ten ranking;
    if (orientation == LossOrientation::listwise) {
        // -sum_k p_k(r_hat) log q_k(r): the log term is constant
        std::vector<real> q(static_cast<std::size_t>(k));
        {
            double mx = *std::max_element(truth.begin(), truth.end());
            double z = 0;
            for (int i = 0; i < k; ++i) z += std::exp(truth[i] - mx);
            for (int i = 0; i < k; ++i)
                q[i] = static_cast<real>(
                    std::log(std::max(std::exp(truth[i] - mx) / z, 1e-12)));
        }
        ranking = scale(sum_all(mul(p, tensor({1, k}, std::move(q)))), real(-1));
    } else {
        // conventional cross-entropy: -sum_k q_k(r) log p_k(r_hat)
        std::vector<real> q(static_cast<std::size_t>(k));
        double mx = *std::max_element(truth.begin(), truth.end());
        double z = 0;
        for (int i = 0; i < k; ++i) z += std::exp(truth[i] - mx);
        for (int i = 0; i < k; ++i) q[i] = static_cast<real>(std::exp(truth[i] - mx) / z);
        ranking = scale(sum_all(mul(tensor({1, k}, std::move(q)), log_clamped(p))), real(-1));
    }
    Ten diff = sub(r, r_hat);
    Ten mse = sum_all(mul(diff, diff));
    return add(ranking, scale(mse, static_cast<real>(lambda)));
}

ParamStore inner_adapt(const ParamStore& params, const LossFn& support_loss, double alpha,
                       int steps) {
    ParamStore adapted = params.clone();
    for (int s = 0; s < steps; ++s) {
        adapted.zero_grad();
        Ten loss = support_loss(adapted);
        if (!loss->all_finite()) throw ValueError("inner_adapt: non-finite support loss");
        backward(loss);
        for (const auto& [name, t] : adapted) {
            if (!std::all_of(t->grad.begin(), t->grad.end(),
                             [](real g) { return std::isfinite(g); }))
                throw ValueError("inner_adapt: non-finite gradient in " + name);
            for (std::size_t i = 0; i < t->data.size(); ++i)
                t->data[i] -= static_cast<real>(alpha) * t->grad[i];
        }
    }
    return adapted;
}

double meta_step(ParamStore& params, const std::vector<GenericTask>& tasks, double alpha,
                 int inner_steps, AdamState& adam, double gamma) {
    if (tasks.empty()) throw ValueError("meta_step: no tasks");
    std::map<std::string, std::vector<real>> grads;
    for (const auto& [name, t] : params) grads.emplace(name, std::vector<real>(t->size(), real(0)));
    double loss_sum = 0;
    for (const auto& task : tasks) {
        ParamStore adapted = inner_adapt(params, task.support_loss, alpha, inner_steps);
        adapted.zero_grad();
        Ten loss = task.query_loss(adapted);
        backward(loss);
        loss_sum += static_cast<double>(loss->data[0]);
        for (const auto& [name, t] : adapted) {
            auto& g = grads.at(name);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += t->grad[i];
        }
    }
    adam_step(params, grads, adam, static_cast<real>(gamma));
    return loss_sum / static_cast<double>(tasks.size());
}

// --- pipeline ------------------------------------------------------------------

HubContext build_hub_context(const std::vector<ModelCard>& cards, const ModelEncoderConfig& cfg) {
    HubContext hub;
    auto v_a = meta_embeddings(cards, cfg);
    auto v_c = functional_embeddings(cards, cfg);
    const int k = static_cast<int>(cards.size());
    const int feat = cfg.d_a + cfg.d_t + cfg.d_c;
    std::vector<real> f(static_cast<std::size_t>(k) * feat);
    for (int i = 0; i < k; ++i) {
        auto v_t = wl_topo_embedding(cards[i].dag, cfg.wl_iterations, cfg.d_t);
        real* row = f.data() + static_cast<std::size_t>(i) * feat;
        for (int j = 0; j < cfg.d_a; ++j) row[j] = static_cast<real>(v_a[i][j]);
        for (int j = 0; j < cfg.d_t; ++j) row[cfg.d_a + j] = static_cast<real>(v_t[j]);
        for (int j = 0; j < cfg.d_c; ++j) row[cfg.d_a + cfg.d_t + j] = static_cast<real>(v_c[i][j]);
        hub.ids.push_back(cards[i].id);
    }
    hub.features = tensor({k, feat}, std::move(f));
    return hub;
}

Ten hub_embedding(const HubContext& hub, const ParamStore& params) {
    return relu(matmul(hub.features, params.get("model_enc.wm")));
}

ParamStore init_params(const ModelConfig& cfg, int hub_size, std::uint64_t seed) {
    (void)hub_size;
    ParamStore params;
    Rng rng = Rng::substream(seed, "init");
    init_data_encoder_params(params, cfg.encoder, rng);
    const int feat = cfg.model_enc.d_a + cfg.model_enc.d_t + cfg.model_enc.d_c;
    params.add_randn("model_enc.wm", {feat, cfg.model_enc.d}, rng,
                     real(1) / std::sqrt(static_cast<real>(feat)));
    init_scorer_params(params, cfg.scorer, rng);
    return params;
}

ScoreResult score_sample(const std::vector<real>& subset, int horizon, const HubContext& hub,
                         const ParamStore& params, const ModelConfig& cfg) {
    Ten e_d = encode_data(subset, params, cfg.encoder);
    Ten e_m = hub_embedding(hub, params);
    return score_hub(e_m, e_d, horizon, params, cfg.scorer);
}

Ten sample_loss(const std::vector<real>& subset, const MetaSample& sample, const HubContext& hub,
                const ParamStore& params, const ModelConfig& cfg, const TrainConfig& tc) {
    ScoreResult res = score_sample(subset, sample.horizon, hub, params, cfg);
    return total_loss(res.scores, sample.scores, tc.lambda, tc.orientation);
}

RankResult rank_models(const ParamStore& params, const TimeSeriesDataset& dataset, int horizon,
                       const HubContext& hub, const ModelConfig& cfg, Rng& rng) {
    const int m = cfg.encoder.infer_resamples;
    const int k = hub.features->rows();
    RankResult out;
    std::vector<std::vector<double>> per_resample;
    Ten e_d_sum;
    for (int i = 0; i < m; ++i) {
        auto subset = sample_subset(dataset, cfg.encoder.look_back, cfg.encoder.subset_size, rng);
        Ten e_d = encode_data(subset, params, cfg.encoder);
        e_d_sum = e_d_sum ? add(e_d_sum, e_d) : e_d;
        ScoreResult r = score_hub(hub_embedding(hub, params), e_d, horizon, params, cfg.scorer);
        per_resample.emplace_back(r.scores->data.begin(), r.scores->data.end());
    }
    Ten e_d_avg = scale(e_d_sum, real(1) / static_cast<real>(m));
    ScoreResult final = score_hub(hub_embedding(hub, params), e_d_avg, horizon, params, cfg.scorer);
    out.scores.assign(final.scores->data.begin(), final.scores->data.end());
    out.order = ranking_from_scores(out.scores);
    out.attention = final.attention;
    out.attention_rows = final.attention_rows;
    out.attention_cols = final.attention_cols;
    out.expert_weights.assign(final.expert_weights->data.begin(), final.expert_weights->data.end());
    out.resample_sd.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        double mean = 0;
        for (const auto& r : per_resample) mean += r[j];
        mean /= m;
        double var = 0;
        for (const auto& r : per_resample) var += (r[j] - mean) * (r[j] - mean);
        out.resample_sd[j] = std::sqrt(var / m);
    }
    return out;
}

double evaluate_mean_tau_w(const ParamStore& params,
                           const std::map<std::string, TimeSeriesDataset>& datasets,
                           const std::vector<MetaSample>& partition, const HubContext& hub,
                           const ModelConfig& cfg, std::uint64_t seed) {
    if (partition.empty()) throw ValueError("evaluate_mean_tau_w: empty partition");
    double sum = 0;
    for (const auto& s : partition) {
        Rng rng = Rng::substream(seed, "rank/" + s.dataset_id + "/" + std::to_string(s.horizon));
        RankResult r = rank_models(params, datasets.at(s.dataset_id), s.horizon, hub, cfg, rng);
        sum += weighted_kendall_tau(r.scores, s.scores);
    }
    return sum / static_cast<double>(partition.size());
}

TrainOutput train(const std::map<std::string, TimeSeriesDataset>& datasets,
                  const std::vector<MetaSample>& meta_train,
                  const std::vector<MetaSample>& meta_val, const HubContext& hub,
                  const ModelConfig& cfg, const TrainConfig& tc) {
    if (meta_train.empty()) throw ValueError("train: empty training partition");
    const auto t0 = std::chrono::steady_clock::now();

    ParamStore params = init_params(cfg, hub.features->rows(), tc.seed);
    AdamState adam;
    Rng task_rng = Rng::substream(tc.seed, "tasks");
    Rng subset_rng = Rng::substream(tc.seed, "subset");

    auto make_loss = [&](const MetaSample& s) {
        auto subset =
            sample_subset(datasets.at(s.dataset_id), cfg.encoder.look_back, cfg.encoder.subset_size,
                          subset_rng);
        return [subset = std::move(subset), s, &hub, &cfg, &tc](const ParamStore& p) {
            return sample_loss(subset, s, hub, p, cfg, tc);
        };
    };

    TrainOutput out;
    TrainReport& report = out.report;
    const int batches_per_epoch =
        std::max<int>(1, static_cast<int>((meta_train.size() + tc.batch_size - 1) / tc.batch_size));
    long long strategy_counter = 0;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        double epoch_loss = 0;
        for (int mb = 0; mb < batches_per_epoch; ++mb) {
            if (tc.meta_learning) {
                // strict alternation of the two sampling strategies per meta-batch
                const SamplingStrategy strat = (strategy_counter++ % 2 == 0)
                                                   ? SamplingStrategy::cross_dataset
                                                   : SamplingStrategy::cross_horizon;
                auto raw_tasks = sample_tasks(meta_train, strat, tc.n_tasks, tc.support_size,
                                              tc.query_size, task_rng);
                std::vector<GenericTask> tasks;
                for (const auto& rt : raw_tasks) {
                    std::vector<LossFn> supp, query;
                    for (const auto& s : rt.support) supp.push_back(make_loss(s));
                    for (const auto& s : rt.query) query.push_back(make_loss(s));
                    auto batch_mean = [](std::vector<LossFn> fns) {
                        return [fns = std::move(fns)](const ParamStore& p) {
                            std::vector<Ten> losses;
                            for (const auto& f : fns) losses.push_back(f(p));
                            return scale(add_n(losses), real(1) / static_cast<real>(losses.size()));
                        };
                    };
                    tasks.push_back({batch_mean(std::move(supp)), batch_mean(std::move(query))});
                }
                epoch_loss += meta_step(params, tasks, tc.alpha, tc.inner_steps, adam, tc.gamma);
            } else {
                // plain empirical-risk arm: mini-batches of the joint objective
                std::vector<Ten> losses;
                for (int i = 0; i < tc.batch_size; ++i) {
                    const auto& s = meta_train[static_cast<std::size_t>(
                        task_rng.uniform_int(0, meta_train.size() - 1))];
                    losses.push_back(make_loss(s)(params));
                }
                Ten loss = scale(add_n(losses), real(1) / static_cast<real>(losses.size()));
                params.zero_grad();
                backward(loss);
                adam_step(params, adam, static_cast<real>(tc.gamma));
                epoch_loss += static_cast<double>(loss->data[0]);
            }
        }
        report.train_loss.push_back(epoch_loss / batches_per_epoch);

        // validation: mean weighted tau plus loss on resampled subsets
        double val_tau = 0, val_loss = 0;
        if (!meta_val.empty()) {
            // fixed validation stream: epoch-to-epoch differences reflect the
            // parameters, not resampled windows
            const std::uint64_t vseed = fnv1a("val", tc.seed);
            val_tau = evaluate_mean_tau_w(params, datasets, meta_val, hub, cfg, vseed);
            Rng vrng = Rng::substream(vseed, "val-loss");
            for (const auto& s : meta_val) {
                auto subset = sample_subset(datasets.at(s.dataset_id), cfg.encoder.look_back,
                                            cfg.encoder.subset_size, vrng);
                val_loss +=
                    static_cast<double>(sample_loss(subset, s, hub, params, cfg, tc)->data[0]);
            }
            val_loss /= static_cast<double>(meta_val.size());
        }
        report.val_loss.push_back(val_loss);
        report.val_tau_w.push_back(val_tau);
        // select on a trailing 3-epoch mean: single-epoch spikes on a small
        // validation split are mostly noise
        double smoothed = 0;
        const int lo = std::max(0, epoch - 2);
        for (int e = lo; e <= epoch; ++e) smoothed += report.val_tau_w[static_cast<std::size_t>(e)];
        smoothed /= static_cast<double>(epoch - lo + 1);
        if (report.best_epoch < 0 || smoothed > report.best_val_tau_w) {
            report.best_val_tau_w = smoothed;
            report.best_epoch = epoch;
            out.best_params = params.clone();
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace tsrank
