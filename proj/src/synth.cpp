#include "tsrank/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace tsrank {

int SyntheticModel::feature_dim() const {
    switch (family) {
        case ModelFamily::linear_ar: return receptive + 1;
        case ModelFamily::windowed_mlp: return hidden + 1;
        case ModelFamily::seasonal_mean: return 4;
    }
    return 0;
}

std::vector<double> SyntheticModel::features(const double* hist, int len) const {
    std::vector<double> f;
    switch (family) {
        case ModelFamily::linear_ar:
            f.reserve(receptive + 1);
            for (int i = 0; i < receptive; ++i) f.push_back(hist[len - receptive + i]);
            f.push_back(1.0);
            break;
        case ModelFamily::windowed_mlp: {
            f.reserve(hidden + 1);
            for (int j = 0; j < hidden; ++j) {
                double a = b1[j];
                for (int i = 0; i < receptive; ++i)
                    a += w1[static_cast<std::size_t>(i) * hidden + j] * hist[len - receptive + i];
                f.push_back(std::tanh(a));
            }
            f.push_back(1.0);
            break;
        }
        case ModelFamily::seasonal_mean: {
            // lag indices clamp so short histories (e.g. probe series) still work
            const int span = std::min(period, len);
            double m = 0;
            for (int i = 0; i < span; ++i) m += hist[len - 1 - i];
            f = {hist[std::max(0, len - period)], hist[std::max(0, len - 2 * period)], m / span,
                 1.0};
            break;
        }
    }
    return f;
}

std::vector<double> SyntheticModel::forecast(const std::vector<double>& history, int horizon) const {
    const int min_hist = family == ModelFamily::seasonal_mean ? 1 : receptive;
    if (static_cast<int>(history.size()) < min_hist)
        throw ValueError("model '" + id + "' needs at least " + std::to_string(min_hist) +
                         " history points, got " + std::to_string(history.size()));
    const int keep = std::min<int>(receptive, static_cast<int>(history.size()));
    std::vector<double> buf(history.end() - keep, history.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        std::vector<double> f = features(buf.data(), static_cast<int>(buf.size()));
        double y = 0;
        for (std::size_t i = 0; i < f.size(); ++i) y += head[i] * f[i];
        out.push_back(y);
        buf.erase(buf.begin());
        buf.push_back(y);
    }
    return out;
}

// --- least squares ----------------------------------------------------------

// Solves (A + maybe-ridge) x = b for symmetric positive semidefinite A via
// Cholesky; falls back to ridge on singularity and notes it.
static std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int n,
                                     double ridge_lambda, const std::string& context) {
    auto cholesky = [n](std::vector<double> m) -> std::vector<double> {
        for (int j = 0; j < n; ++j) {
            double d = m[static_cast<std::size_t>(j) * n + j];
            for (int k = 0; k < j; ++k) {
                double l = m[static_cast<std::size_t>(j) * n + k];
                d -= l * l;
            }
            if (d <= 1e-300) return {};
            d = std::sqrt(d);
            m[static_cast<std::size_t>(j) * n + j] = d;
            for (int i = j + 1; i < n; ++i) {
                double s = m[static_cast<std::size_t>(i) * n + j];
                for (int k = 0; k < j; ++k)
                    s -= m[static_cast<std::size_t>(i) * n + k] * m[static_cast<std::size_t>(j) * n + k];
                m[static_cast<std::size_t>(i) * n + j] = s / d;
            }
        }
        return m;
    };
    std::vector<double> l = cholesky(a);
    if (l.empty()) {
        std::clog << "[oracle] singular least-squares system (" << context
                  << "); applying ridge fallback lambda=" << ridge_lambda << "\n";
        for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] += ridge_lambda;
        l = cholesky(a);
        if (l.empty()) throw ValueError("least squares failed even with ridge: " + context);
    }
    // forward then backward substitution
    std::vector<double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * y[k];
        y[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l[static_cast<std::size_t>(k) * n + i] * x[k];
        x[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
    return x;
}

struct StandardizedChannels {
    std::vector<std::vector<double>> ch;  // per channel, full length, train-split stats
};

static StandardizedChannels standardize(const TimeSeriesDataset& ds) {
    StandardizedChannels s;
    const int tr = ds.train_end();
    for (int c = 0; c < ds.cols; ++c) {
        double mean = 0;
        for (int t = 0; t < tr; ++t) mean += ds.at(t, c);
        mean /= tr;
        double var = 0;
        for (int t = 0; t < tr; ++t) var += (ds.at(t, c) - mean) * (ds.at(t, c) - mean);
        double sd = std::max(std::sqrt(var / tr), 1e-8);
        std::vector<double> v(static_cast<std::size_t>(ds.rows));
        for (int t = 0; t < ds.rows; ++t) v[t] = (ds.at(t, c) - mean) / sd;
        s.ch.push_back(std::move(v));
    }
    return s;
}

static std::vector<double> refit_head(const SyntheticModel& model, const StandardizedChannels& data,
                                      int train_end, const OracleBudget& budget,
                                      const std::string& context) {
    const int fdim = model.feature_dim();
    std::vector<double> xtx(static_cast<std::size_t>(fdim) * fdim, 0.0);
    std::vector<double> xty(static_cast<std::size_t>(fdim), 0.0);
    const int n_ch = static_cast<int>(data.ch.size());
    const int first = model.receptive - 1;
    const int last = train_end - 2;  // predicts position t+1
    if (last < first) throw ValueError("train split too short for model " + model.id);
    const int per_ch = std::max(1, budget.max_train_windows / n_ch);
    const int stride = std::max(1, (last - first) / per_ch + 1);
    for (int c = 0; c < n_ch; ++c) {
        const auto& x = data.ch[c];
        for (int t = first; t <= last; t += stride) {
            std::vector<double> f = model.features(x.data(), t + 1);
            const double y = x[t + 1];
            for (int i = 0; i < fdim; ++i) {
                xty[i] += f[i] * y;
                for (int j = i; j < fdim; ++j) xtx[static_cast<std::size_t>(i) * fdim + j] += f[i] * f[j];
            }
        }
    }
    for (int i = 0; i < fdim; ++i)
        for (int j = 0; j < i; ++j)
            xtx[static_cast<std::size_t>(i) * fdim + j] = xtx[static_cast<std::size_t>(j) * fdim + i];
    return solve_spd(std::move(xtx), std::move(xty), fdim, budget.ridge_lambda, context);
}

static double test_mse(const SyntheticModel& model, const StandardizedChannels& data, int test_start,
                       int rows, int horizon, const OracleBudget& budget) {
    const int n_ch = static_cast<int>(data.ch.size());
    const int first = test_start + model.receptive - 1;
    const int last = rows - horizon - 1;
    if (last < first)
        throw ValueError("test split too short for model " + model.id + " at horizon " +
                         std::to_string(horizon));
    const int per_ch = std::max(1, budget.max_test_windows / n_ch);
    const int stride = std::max(1, (last - first) / per_ch + 1);
    double se = 0;
    long long n = 0;
    for (int c = 0; c < n_ch; ++c) {
        const auto& x = data.ch[c];
        for (int t = first; t <= last; t += stride) {
            std::vector<double> hist(x.begin() + (t + 1 - model.receptive), x.begin() + (t + 1));
            std::vector<double> fc = model.forecast(hist, horizon);
            for (int h = 0; h < horizon; ++h) {
                const double e = fc[h] - x[t + 1 + h];
                se += e * e;
            }
            n += horizon;
        }
    }
    return se / static_cast<double>(n);
}

MetaSample oracle_ground_truth(const std::vector<SyntheticModel>& hub,
                               const TimeSeriesDataset& dataset, int horizon,
                               const OracleBudget& budget, ScoreNormalization mode) {
    StandardizedChannels data = standardize(dataset);
    const int train_end = dataset.train_end();
    const int test_start = dataset.val_end();
    std::vector<double> mse;
    for (const auto& m : hub) {
        SyntheticModel adapted = m;
        adapted.head = refit_head(m, data, train_end, budget,
                                  m.id + " on " + dataset.id + " H=" + std::to_string(horizon));
        mse.push_back(test_mse(adapted, data, test_start, dataset.rows, horizon, budget));
    }
    MetaSample s;
    s.dataset_id = dataset.id;
    s.horizon = horizon;
    s.scores = normalize_scores(mse, mode);
    s.provenance = Provenance::oracle;
    return s;
}

// --- world generation ---------------------------------------------------------

TimeSeriesDataset make_dataset(std::uint64_t seed, int index, int length) {
    Rng rng = Rng::substream(seed, "world/ds" + std::to_string(index));
    TimeSeriesDataset ds;
    ds.id = "synth" + std::to_string(index);
    ds.frequency = "1 hour";
    const int regime = index % 3;
    const int period = std::vector<int>{24, 44, 60}[(index / 3) % 3];
    const int channels = 1 + index % 2;
    static const char* domains[3][2] = {{"electricity", "traffic"},
                                        {"economic", "nature"},
                                        {"environment", "energy"}};
    ds.domain = domains[regime][index % 2];
    ds.rows = length;
    ds.cols = channels;
    ds.values.assign(static_cast<std::size_t>(length) * channels, 0.0);

    for (int c = 0; c < channels; ++c) {
        double amp, phi, sigma, trend;
        switch (regime) {
            case 0:  // seasonal-dominant
                amp = rng.uniform(2.0, 4.0);
                phi = rng.uniform(0.2, 0.5);
                sigma = rng.uniform(0.2, 0.5);
                trend = rng.uniform(-2e-4, 2e-4);
                break;
            case 1:  // AR-dominant
                amp = rng.uniform(0.0, 0.4);
                phi = rng.uniform(0.75, 0.95);
                sigma = rng.uniform(0.5, 1.0);
                trend = rng.uniform(-1e-4, 1e-4);
                break;
            default:  // trend + season mix
                amp = rng.uniform(1.0, 2.0);
                phi = rng.uniform(0.5, 0.8);
                sigma = rng.uniform(0.3, 0.7);
                trend = (rng.uniform(0, 1) < 0.5 ? -1 : 1) * rng.uniform(5e-4, 2e-3);
                break;
        }
        const double amp2 = amp * rng.uniform(0.1, 0.4);
        const double phase = rng.uniform(0.0, static_cast<double>(period));
        double noise = 0;
        for (int t = 0; t < length; ++t) {
            noise = phi * noise + sigma * rng.normal();
            const double season = amp * std::sin(2.0 * M_PI * (t + phase) / period) +
                                  amp2 * std::sin(4.0 * M_PI * (t + phase) / period);
            ds.at(t, c) = trend * t + season + noise;
        }
    }
    return ds;
}

namespace {
struct ModelTemplate {
    ModelFamily family;
    int receptive;
    int hidden;  // or period, per family
    const char* name;
};
const ModelTemplate kHubTemplates[] = {
    {ModelFamily::windowed_mlp, 24, 32, "patchnet-s"},
    {ModelFamily::windowed_mlp, 48, 64, "patchnet-m"},
    {ModelFamily::windowed_mlp, 96, 96, "patchnet-l"},
    {ModelFamily::linear_ar, 8, 0, "argpt-s"},
    {ModelFamily::linear_ar, 32, 0, "argpt-m"},
    {ModelFamily::seasonal_mean, 0, 24, "cyclecast-24"},
    {ModelFamily::seasonal_mean, 0, 44, "cyclecast-44"},
    {ModelFamily::seasonal_mean, 0, 60, "cyclecast-60"},
};

DagGraph family_dag(const SyntheticModel& m) {
    DagGraph g;
    auto node = [&](const std::string& id, const std::string& label) {
        g.nodes.push_back({id, label});
    };
    auto edge = [&](const std::string& a, const std::string& b) { g.edges.emplace_back(a, b); };
    switch (m.family) {
        case ModelFamily::windowed_mlp:
            node("in", "input");
            node("fe", "dense_" + std::to_string(m.hidden));
            node("act", "tanh");
            node("head", "linear_head");
            node("out", "output");
            edge("in", "fe");
            edge("fe", "act");
            edge("act", "head");
            edge("head", "out");
            break;
        case ModelFamily::linear_ar:
            node("in", "input");
            node("lags", "lag_window_" + std::to_string(m.receptive));
            node("head", "linear_head");
            node("out", "output");
            edge("in", "lags");
            edge("lags", "head");
            edge("head", "out");
            break;
        case ModelFamily::seasonal_mean:
            node("in", "input");
            node("lag1", "seasonal_lag_" + std::to_string(m.period));
            node("lag2", "seasonal_lag_" + std::to_string(2 * m.period));
            node("pool", "mean_pool");
            node("head", "linear_head");
            node("out", "output");
            edge("in", "lag1");
            edge("in", "lag2");
            edge("in", "pool");
            edge("lag1", "head");
            edge("lag2", "head");
            edge("pool", "head");
            edge("head", "out");
            break;
    }
    return g;
}
}  // namespace

std::vector<SyntheticModel> make_hub(std::uint64_t seed, int k_models) {
    std::vector<SyntheticModel> hub;
    const int n_templates = static_cast<int>(std::size(kHubTemplates));
    for (int k = 0; k < k_models; ++k) {
        const ModelTemplate& tpl = kHubTemplates[k % n_templates];
        SyntheticModel m;
        m.family = tpl.family;
        m.id = std::string(tpl.name) + (k >= n_templates ? "-v" + std::to_string(k / n_templates) : "");
        Rng rng = Rng::substream(seed, "hub/" + m.id);
        switch (tpl.family) {
            case ModelFamily::windowed_mlp: {
                m.receptive = tpl.receptive;
                m.hidden = tpl.hidden;
                m.w1.resize(static_cast<std::size_t>(m.receptive) * m.hidden);
                m.b1.resize(static_cast<std::size_t>(m.hidden));
                const double sd = 1.0 / std::sqrt(static_cast<double>(m.receptive));
                for (double& v : m.w1) v = rng.normal(0.0, sd);
                for (double& v : m.b1) v = rng.normal(0.0, 0.1);
                break;
            }
            case ModelFamily::linear_ar:
                m.receptive = tpl.receptive;
                break;
            case ModelFamily::seasonal_mean:
                m.period = tpl.hidden;
                m.receptive = 2 * m.period;
                break;
        }
        // pre-train the head on a series from the model's own domain regime
        const int pretrain_regime = m.family == ModelFamily::windowed_mlp ? 2
                                    : m.family == ModelFamily::linear_ar ? 1
                                                                         : 0;
        int idx = pretrain_regime;
        if (m.family == ModelFamily::seasonal_mean) {
            // align the pretrain period with the model's own period
            idx = pretrain_regime + 3 * ((m.period == 24) ? 0 : (m.period == 44) ? 1 : 2);
        }
        TimeSeriesDataset pre = make_dataset(fnv1a("pretrain/" + m.id, seed), idx, 3000);
        StandardizedChannels data = standardize(pre);
        OracleBudget budget;
        m.head = refit_head(m, data, pre.train_end(), budget, "pretrain " + m.id);
        hub.push_back(std::move(m));
    }
    return hub;
}

std::vector<ModelCard> make_cards(const std::vector<SyntheticModel>& hub) {
    std::vector<ModelCard> cards;
    for (const auto& m : hub) {
        ModelCard c;
        c.id = m.id;
        switch (m.family) {
            case ModelFamily::windowed_mlp:
                c.architecture = Architecture::encoder_only;
                c.hidden_dim = m.hidden;
                c.pretrain_domains = {"environment", "energy", "general"};
                break;
            case ModelFamily::linear_ar:
                c.architecture = Architecture::decoder_only;
                c.hidden_dim = m.receptive;
                c.pretrain_domains = {"economic", "nature", "general"};
                break;
            case ModelFamily::seasonal_mean:
                c.architecture = Architecture::encoder_decoder;
                c.hidden_dim = m.period;
                c.pretrain_domains = {"electricity", "traffic", "general"};
                break;
        }
        c.param_count = static_cast<std::int64_t>(m.w1.size() + m.b1.size() + m.head.size());
        // multiply-accumulates per forecast step, in GMACs
        c.gmacs = std::max(1e-9, static_cast<double>(m.w1.size() + m.head.size()) * 1e-9);
        c.dag = family_dag(m);
        c.forecaster = [model = m](const std::vector<double>& hist, int h) {
            return model.forecast(hist, h);
        };
        cards.push_back(std::move(c));
    }
    return cards;
}

SyntheticWorld generate_synthetic_world(std::uint64_t seed, int n_datasets, int k_models,
                                        const std::vector<int>& horizons,
                                        const OracleBudget& budget) {
    if (n_datasets < 4) throw ValueError("generate_synthetic_world: need n_datasets >= 4");
    if (k_models < 2) throw ValueError("generate_synthetic_world: need K >= 2");
    SyntheticWorld world;
    const int max_h = *std::max_element(horizons.begin(), horizons.end());
    const int length = std::max(6000, 5 * (max_h + 200));
    for (int i = 0; i < n_datasets; ++i) world.datasets.push_back(make_dataset(seed, i, length));
    world.hub = make_hub(seed, k_models);
    world.cards = make_cards(world.hub);
    for (const auto& ds : world.datasets)
        for (int h : horizons) world.meta.push_back(oracle_ground_truth(world.hub, ds, h, budget));
    return world;
}

}  // namespace tsrank
