#include "tsrank/meta.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "tsrank/metrics.hpp"

namespace tsrank {

using nlohmann::json;

std::vector<double> normalize_scores(const std::vector<double>& errors, ScoreNormalization mode) {
    if (errors.size() < 1) throw std::invalid_argument("normalize_scores: empty error vector");
    for (double e : errors)
        if (!std::isfinite(e)) throw std::invalid_argument("normalize_scores: non-finite error");
    const double lo = *std::min_element(errors.begin(), errors.end());
    const double hi = *std::max_element(errors.begin(), errors.end());
    const std::size_t k = errors.size();
    if (hi == lo) return std::vector<double>(k, 0.5);
    std::vector<double> r(k);
    if (mode == ScoreNormalization::min_max) {
        for (std::size_t i = 0; i < k; ++i) r[i] = (hi - errors[i]) / (hi - lo);
    } else {
        // rank-based alternative: (K - rank) / (K - 1) on ascending-error ranks
        std::vector<double> neg(k);
        for (std::size_t i = 0; i < k; ++i) neg[i] = -errors[i];
        std::vector<double> rho = descending_average_ranks(neg);  // 0 = best (lowest error)
        for (std::size_t i = 0; i < k; ++i)
            r[i] = (static_cast<double>(k) - 1.0 - rho[i]) / (static_cast<double>(k) - 1.0);
    }
    return r;
}

MetaSplit split_meta(const std::vector<MetaSample>& meta, int holdout_count, std::uint64_t seed) {
    std::set<std::string> id_set;
    for (const auto& s : meta) id_set.insert(s.dataset_id);
    std::vector<std::string> ids(id_set.begin(), id_set.end());
    if (static_cast<int>(ids.size()) < holdout_count + 2)
        throw std::invalid_argument("split_meta: need at least holdout_count + 2 datasets, have " +
                                    std::to_string(ids.size()));
    Rng rng = Rng::substream(seed, "split");
    std::shuffle(ids.begin(), ids.end(), rng.engine());

    MetaSplit split;
    split.test_datasets.assign(ids.begin(), ids.begin() + holdout_count);
    std::vector<std::string> rest(ids.begin() + holdout_count, ids.end());
    // 8:1 by dataset; validation always gets at least one dataset
    int n_val = std::max(1, static_cast<int>(std::llround(rest.size() / 9.0)));
    n_val = std::min<int>(n_val, static_cast<int>(rest.size()) - 1);
    split.val_datasets.assign(rest.begin(), rest.begin() + n_val);
    split.train_datasets.assign(rest.begin() + n_val, rest.end());

    auto contains = [](const std::vector<std::string>& v, const std::string& x) {
        return std::find(v.begin(), v.end(), x) != v.end();
    };
    for (const auto& s : meta) {
        if (contains(split.test_datasets, s.dataset_id))
            split.test.push_back(s);
        else if (contains(split.val_datasets, s.dataset_id))
            split.val.push_back(s);
        else
            split.train.push_back(s);
    }
    return split;
}

std::vector<Task> sample_tasks(const std::vector<MetaSample>& meta_train,
                               SamplingStrategy strategy, int n_tasks, int support_size,
                               int query_size, Rng& rng) {
    std::map<std::string, std::vector<const MetaSample*>> by_dataset;
    std::map<int, std::vector<const MetaSample*>> by_horizon;
    for (const auto& s : meta_train) {
        by_dataset[s.dataset_id].push_back(&s);
        by_horizon[s.horizon].push_back(&s);
    }
    if (by_dataset.size() < 2)
        throw std::invalid_argument("sample_tasks: need at least 2 datasets, have " +
                                    std::to_string(by_dataset.size()));
    if (strategy == SamplingStrategy::cross_horizon && by_horizon.size() < 2)
        throw std::invalid_argument("sample_tasks: cross_horizon needs at least 2 horizons, have " +
                                    std::to_string(by_horizon.size()));

    std::vector<std::string> dataset_ids;
    for (const auto& [id, v] : by_dataset) dataset_ids.push_back(id);
    std::vector<int> horizons;
    for (const auto& [h, v] : by_horizon) horizons.push_back(h);

    auto draw = [&](const std::vector<const MetaSample*>& pool, int count) {
        std::vector<MetaSample> out;
        for (int i = 0; i < count; ++i)
            out.push_back(*pool[static_cast<std::size_t>(rng.uniform_int(0, pool.size() - 1))]);
        return out;
    };

    std::vector<Task> tasks;
    for (int t = 0; t < n_tasks; ++t) {
        Task task;
        task.strategy = strategy;
        if (strategy == SamplingStrategy::cross_dataset) {
            const int a = static_cast<int>(rng.uniform_int(0, dataset_ids.size() - 1));
            int b = static_cast<int>(rng.uniform_int(0, dataset_ids.size() - 2));
            if (b >= a) ++b;
            task.support = draw(by_dataset[dataset_ids[a]], support_size);
            task.query = draw(by_dataset[dataset_ids[b]], query_size);
        } else {
            const int hi = static_cast<int>(rng.uniform_int(0, horizons.size() - 1));
            const int h_supp = horizons[hi];
            task.support = draw(by_horizon[h_supp], support_size);
            std::vector<const MetaSample*> others;
            for (const auto& s : meta_train)
                if (s.horizon != h_supp) others.push_back(&s);
            task.query = draw(others, query_size);
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

void save_meta_dataset(const std::vector<MetaSample>& samples,
                       const std::vector<std::string>& hub_ids, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["hub"] = hub_ids;
    j["samples"] = json::array();
    for (const auto& s : samples)
        j["samples"].push_back({{"dataset_id", s.dataset_id},
                                {"horizon", s.horizon},
                                {"scores", s.scores},
                                {"provenance", s.provenance == Provenance::oracle ? "oracle" : "external"}});
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write meta-dataset: " + path);
    f << j.dump(2) << "\n";
}

std::vector<MetaSample> load_meta_dataset(const std::string& path,
                                          std::vector<std::string>* hub_ids) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open meta-dataset: " + path);
    json j = json::parse(f);
    if (hub_ids) *hub_ids = j.at("hub").get<std::vector<std::string>>();
    std::vector<MetaSample> samples;
    for (const auto& s : j.at("samples")) {
        MetaSample m;
        m.dataset_id = s.at("dataset_id").get<std::string>();
        m.horizon = s.at("horizon").get<int>();
        m.scores = s.at("scores").get<std::vector<double>>();
        m.provenance =
            s.at("provenance").get<std::string>() == "oracle" ? Provenance::oracle : Provenance::external;
        samples.push_back(std::move(m));
    }
    return samples;
}

}  // namespace tsrank
