// Command-line front end: synthetic world generation, training, ranking,
// evaluation, and gradient auditing. Every run writes a manifest with the
// resolved config, seeds, and input file hashes so runs can be replayed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsrank/dataset.hpp"
#include "tsrank/gradcheck.hpp"
#include "tsrank/meta.hpp"
#include "tsrank/metrics.hpp"
#include "tsrank/model_encoder.hpp"
#include "tsrank/param_store.hpp"
#include "tsrank/rng.hpp"
#include "tsrank/synth.hpp"
#include "tsrank/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsrank;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string precision = "f64";  // checkpoint dtype; computation stays 64-bit

    int n_datasets = 14;
    int k_models = 8;
    std::vector<int> horizons = {96, 192, 336, 720};

    ModelConfig model;
    TrainConfig train;
};

void apply_config_json(RunConfig& rc, const json& j) {
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") rc.seed = value.get<std::uint64_t>();
        else if (key == "out_dir") rc.out_dir = value.get<std::string>();
        else if (key == "precision") rc.precision = value.get<std::string>();
        else if (key == "n_datasets") rc.n_datasets = value.get<int>();
        else if (key == "k_models") rc.k_models = value.get<int>();
        else if (key == "horizons") rc.horizons = value.get<std::vector<int>>();
        else if (key == "look_back") rc.model.encoder.look_back = value.get<int>();
        else if (key == "patch_size") rc.model.encoder.patch_size = value.get<int>();
        else if (key == "embed_dim") {
            rc.model.encoder.d = value.get<int>();
            rc.model.scorer.d = value.get<int>();
            rc.model.model_enc.d = value.get<int>();
        } else if (key == "subset_size") rc.model.encoder.subset_size = value.get<int>();
        else if (key == "infer_resamples") rc.model.encoder.infer_resamples = value.get<int>();
        else if (key == "experts") rc.model.scorer.experts = value.get<int>();
        else if (key == "expert_hidden") rc.model.scorer.expert_hidden = value.get<int>();
        else if (key == "router_hidden") rc.model.scorer.router_hidden = value.get<int>();
        else if (key == "lambda") rc.train.lambda = value.get<double>();
        else if (key == "alpha") rc.train.alpha = value.get<double>();
        else if (key == "gamma") rc.train.gamma = value.get<double>();
        else if (key == "inner_steps") rc.train.inner_steps = value.get<int>();
        else if (key == "n_tasks") rc.train.n_tasks = value.get<int>();
        else if (key == "support_size") rc.train.support_size = value.get<int>();
        else if (key == "query_size") rc.train.query_size = value.get<int>();
        else if (key == "epochs") rc.train.epochs = value.get<int>();
        else if (key == "batch_size") rc.train.batch_size = value.get<int>();
        else if (key == "meta_learning") rc.train.meta_learning = value.get<bool>();
        else if (key == "holdout_count") rc.train.holdout_count = value.get<int>();
        else if (key == "orientation") {
            auto s = value.get<std::string>();
            if (s == "listwise") rc.train.orientation = LossOrientation::listwise;
            else if (s == "cross_entropy") rc.train.orientation = LossOrientation::cross_entropy;
            else throw std::runtime_error("unknown orientation: " + s);
        } else {
            throw std::runtime_error("unknown config key: " + key);
        }
    }
}

json config_to_json(const RunConfig& rc) {
    json j;
    j["seed"] = rc.seed;
    j["out_dir"] = rc.out_dir;
    j["precision"] = rc.precision;
    j["n_datasets"] = rc.n_datasets;
    j["k_models"] = rc.k_models;
    j["horizons"] = rc.horizons;
    j["look_back"] = rc.model.encoder.look_back;
    j["patch_size"] = rc.model.encoder.patch_size;
    j["embed_dim"] = rc.model.encoder.d;
    j["subset_size"] = rc.model.encoder.subset_size;
    j["infer_resamples"] = rc.model.encoder.infer_resamples;
    j["experts"] = rc.model.scorer.experts;
    j["expert_hidden"] = rc.model.scorer.expert_hidden;
    j["router_hidden"] = rc.model.scorer.router_hidden;
    j["lambda"] = rc.train.lambda;
    j["alpha"] = rc.train.alpha;
    j["gamma"] = rc.train.gamma;
    j["inner_steps"] = rc.train.inner_steps;
    j["n_tasks"] = rc.train.n_tasks;
    j["support_size"] = rc.train.support_size;
    j["query_size"] = rc.train.query_size;
    j["epochs"] = rc.train.epochs;
    j["batch_size"] = rc.train.batch_size;
    j["meta_learning"] = rc.train.meta_learning;
    j["holdout_count"] = rc.train.holdout_count;
    j["orientation"] =
        rc.train.orientation == LossOrientation::listwise ? "listwise" : "cross_entropy";
    return j;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto s = buf.str();
    std::uint64_t h = fnv1a(std::string_view(s.data(), s.size()));
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

void write_manifest(const RunConfig& rc, const std::string& command,
                    const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_paths) {
    json m;
    m["format_version"] = 1;
    m["command"] = command;
    auto cfg = config_to_json(rc);
    cfg.erase("out_dir");  // identical runs into different directories stay identical
    m["config"] = cfg;
    json inputs = json::object();
    // keyed by filename: runs that only differ in directory layout stay identical
    for (const auto& p : input_paths) inputs[fs::path(p).filename().string()] = file_hash_hex(p);
    m["inputs"] = inputs;
    json outs = json::array();
    for (const auto& p : output_paths)
        outs.push_back(fs::relative(p, rc.out_dir).generic_string());
    m["outputs"] = outs;
    std::ofstream out(fs::path(rc.out_dir) / (command + "_manifest.json"));
    out << m.dump(2) << "\n";
}

struct World {
    std::map<std::string, TimeSeriesDataset> datasets;
    std::vector<ModelCard> cards;
    std::vector<MetaSample> meta;
    std::vector<std::string> input_files;  // for the manifest
};

World load_world(const std::string& dir) {
    World w;
    std::vector<std::string> hub_ids;
    auto meta_path = (fs::path(dir) / "meta.json").string();
    w.meta = load_meta_dataset(meta_path, &hub_ids);
    w.input_files.push_back(meta_path);
    for (const auto& id : hub_ids) {
        auto p = (fs::path(dir) / "cards" / (id + ".json")).string();
        w.cards.push_back(model_card_from_json_file(p));
        w.input_files.push_back(p);
    }
    std::set<std::string> ds_ids;
    for (const auto& s : w.meta) ds_ids.insert(s.dataset_id);
    for (const auto& id : ds_ids) {
        auto p = (fs::path(dir) / "datasets" / (id + ".csv")).string();
        auto ds = load_dataset(p);
        ds.id = id;
        w.datasets.emplace(id, std::move(ds));
        w.input_files.push_back(p);
    }
    return w;
}

int cmd_gen_synthetic(const RunConfig& rc) {
    auto world = generate_synthetic_world(rc.seed, rc.n_datasets, rc.k_models, rc.horizons);
    fs::create_directories(fs::path(rc.out_dir) / "datasets");
    fs::create_directories(fs::path(rc.out_dir) / "cards");
    std::vector<std::string> outputs;
    for (const auto& ds : world.datasets) {
        auto p = (fs::path(rc.out_dir) / "datasets" / (ds.id + ".csv")).string();
        save_dataset_csv(ds, p);
        outputs.push_back(p);
    }
    std::vector<std::string> hub_ids;
    for (auto card : world.cards) {
        // bake the probe responses in, so a reloaded world needs no forecaster
        card.probe_signature = probe_signature(card, rc.model.model_enc);
        auto p = (fs::path(rc.out_dir) / "cards" / (card.id + ".json")).string();
        model_card_to_json_file(card, p);
        outputs.push_back(p);
        hub_ids.push_back(card.id);
    }
    auto meta_path = (fs::path(rc.out_dir) / "meta.json").string();
    save_meta_dataset(world.meta, hub_ids, meta_path);
    outputs.push_back(meta_path);
    write_manifest(rc, "gen-synthetic", {}, outputs);
    std::cout << "world: " << world.datasets.size() << " datasets, " << world.cards.size()
              << " hub models, " << world.meta.size() << " meta samples -> " << rc.out_dir << "\n";
    return 0;
}

int cmd_train(RunConfig rc, const std::string& world_dir) {
    auto w = load_world(world_dir);
    rc.train.seed = rc.seed;
    auto split = split_meta(w.meta, rc.train.holdout_count, rc.seed);
    auto hub = build_hub_context(w.cards, rc.model.model_enc);
    auto out = train(w.datasets, split.train, split.val, hub, rc.model, rc.train);

    fs::create_directories(rc.out_dir);
    auto ckpt = (fs::path(rc.out_dir) / "checkpoint.bin").string();
    out.best_params.save(ckpt, rc.precision == "f32" ? "f32" : "f64");

    json rep;
    rep["train_loss"] = out.report.train_loss;
    rep["val_loss"] = out.report.val_loss;
    rep["val_tau_w"] = out.report.val_tau_w;
    rep["best_val_tau_w"] = out.report.best_val_tau_w;
    rep["best_epoch"] = out.report.best_epoch;
    rep["train_datasets"] = split.train_datasets;
    rep["val_datasets"] = split.val_datasets;
    rep["test_datasets"] = split.test_datasets;
    auto rep_path = (fs::path(rc.out_dir) / "train_report.json").string();
    std::ofstream(rep_path) << rep.dump(2) << "\n";

    write_manifest(rc, "train", w.input_files, {ckpt, rep_path});
    std::cout << "best val tau_w " << out.report.best_val_tau_w << " (epoch "
              << out.report.best_epoch << "), checkpoint -> " << ckpt << "\n";
    return 0;
}

int cmd_rank(const RunConfig& rc, const std::string& world_dir, const std::string& ckpt,
             const std::string& dataset_id, int horizon, const std::string& attention_path) {
    auto w = load_world(world_dir);
    auto it = w.datasets.find(dataset_id);
    if (it == w.datasets.end()) throw std::runtime_error("unknown dataset id: " + dataset_id);
    auto params = ParamStore::load(ckpt);
    auto hub = build_hub_context(w.cards, rc.model.model_enc);

    auto rng = Rng::substream(rc.seed, "rank/" + dataset_id + "/" + std::to_string(horizon));
    auto res = rank_models(params, it->second, horizon, hub, rc.model, rng);

    fs::create_directories(rc.out_dir);
    auto csv_path =
        (fs::path(rc.out_dir) / ("rank_" + dataset_id + "_" + std::to_string(horizon) + ".csv"))
            .string();
    std::ofstream csv(csv_path);
    csv << "rank,model_id,score,resample_sd\n";
    std::cout << "ranking for " << dataset_id << " @ horizon " << horizon << ":\n";
    for (std::size_t r = 0; r < res.order.size(); ++r) {
        int m = res.order[r];
        char line[256];
        std::snprintf(line, sizeof line, "%zu,%s,%.17g,%.17g\n", r + 1, hub.ids[m].c_str(),
                      res.scores[m], res.resample_sd[m]);
        csv << line;
        std::cout << "  " << (r + 1) << ". " << hub.ids[m] << "  score=" << res.scores[m]
                  << "  sd=" << res.resample_sd[m] << "\n";
    }
    std::vector<std::string> outputs = {csv_path};

    if (!attention_path.empty()) {
        std::ofstream att(attention_path);
        att << "model_id";
        for (int c = 0; c < res.attention_cols; ++c) att << ",patch" << c;
        att << "\n";
        for (int r = 0; r < res.attention_rows; ++r) {
            att << hub.ids[r];
            for (int c = 0; c < res.attention_cols; ++c) {
                char cell[64];
                std::snprintf(cell, sizeof cell, ",%.17g",
                              double(res.attention[static_cast<std::size_t>(r) * res.attention_cols + c]));
                att << cell;
            }
            att << "\n";
        }
        outputs.push_back(attention_path);
    }
    write_manifest(rc, "rank", w.input_files, outputs);
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& world_dir, const std::string& ckpt,
             const std::string& split_name, const std::string& stub) {
    auto w = load_world(world_dir);
    auto split = split_meta(w.meta, rc.train.holdout_count, rc.seed);
    const auto& part = split_name == "train" ? split.train
                       : split_name == "val" ? split.val
                                             : split.test;
    HubContext hub;
    ParamStore params;
    if (stub == "none") {
        hub = build_hub_context(w.cards, rc.model.model_enc);
        params = ParamStore::load(ckpt);
    }

    fs::create_directories(rc.out_dir);
    auto csv_path = (fs::path(rc.out_dir) / ("eval_" + split_name + ".csv")).string();
    std::ofstream csv(csv_path);
    csv << "dataset,horizon,tau,tau_w,top1_pred,top1_true\n";

    double sum_tau = 0, sum_tau_w = 0;
    std::vector<std::vector<int>> rankings;
    std::vector<std::vector<double>> truths;
    for (const auto& s : part) {
        std::vector<double> scores;
        if (stub == "oracle") {
            scores = s.scores;
        } else if (stub == "random") {
            auto rng = Rng::substream(rc.seed,
                                      "stub-random/" + s.dataset_id + "/" + std::to_string(s.horizon));
            scores.resize(s.scores.size());
            for (auto& v : scores) v = rng.uniform();
        } else {
            auto rng =
                Rng::substream(rc.seed, "rank/" + s.dataset_id + "/" + std::to_string(s.horizon));
            auto res = rank_models(params, w.datasets.at(s.dataset_id), s.horizon, hub, rc.model, rng);
            scores = res.scores;
        }
        double tau = kendall_tau(scores, s.scores);
        double tau_w = weighted_kendall_tau(scores, s.scores);
        sum_tau += tau;
        sum_tau_w += tau_w;
        auto order = ranking_from_scores(scores);
        auto true_order = ranking_from_scores(s.scores);
        rankings.push_back(order);
        truths.push_back(s.scores);
        char line[256];
        std::snprintf(line, sizeof line, "%s,%d,%.17g,%.17g,%d,%d\n", s.dataset_id.c_str(),
                      s.horizon, tau, tau_w, order[0], true_order[0]);
        csv << line;
    }

    json agg;
    agg["n_cases"] = part.size();
    agg["split"] = split_name;
    agg["stub"] = stub;
    if (!part.empty()) {
        agg["mean_tau"] = sum_tau / double(part.size());
        agg["mean_tau_w"] = sum_tau_w / double(part.size());
        for (int k : {1, 2, 3}) agg["pr_top_" + std::to_string(k)] = pr_top_k(rankings, truths, k);
    }
    auto agg_path = (fs::path(rc.out_dir) / ("eval_" + split_name + ".json")).string();
    std::ofstream(agg_path) << agg.dump(2) << "\n";

    std::vector<std::string> inputs = w.input_files;
    if (stub == "none") inputs.push_back(ckpt);
    write_manifest(rc, "eval", inputs, {csv_path, agg_path});
    std::cout << agg.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const RunConfig& rc, const std::string& component, bool inject_bug,
                  int instances, double tolerance) {
    auto rows = gradcheck_all(component, inject_bug, instances, tolerance);
    if (rows.empty()) {
        std::cerr << "no gradcheck component matches '" << component << "'\n";
        return 2;
    }
    bool all_ok = true;
    for (const auto& r : rows) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.component
                  << "  max_rel_error=" << r.max_rel_error << "\n";
        all_ok = all_ok && r.passed;
    }
    fs::create_directories(rc.out_dir);
    json j = json::array();
    for (const auto& r : rows)
        j.push_back({{"component", r.component},
                     {"max_rel_error", r.max_rel_error},
                     {"passed", r.passed}});
    std::ofstream(fs::path(rc.out_dir) / "gradcheck.json") << j.dump(2) << "\n";
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-series model-hub ranking toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    RunConfig rc;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    auto* seed_opt = app.add_option("--seed", rc.seed, "root seed");
    auto* out_opt = app.add_option("--out-dir", rc.out_dir, "output directory");
    auto* prec_opt = app.add_option("--precision", rc.precision, "checkpoint dtype: f32 or f64")
                         ->check(CLI::IsMember({"f32", "f64"}));

    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic world + oracle rankings");
    auto* nd_opt = gen->add_option("--n-datasets", rc.n_datasets);
    auto* km_opt = gen->add_option("--k-models", rc.k_models);
    auto* hz_opt = gen->add_option("--horizons", rc.horizons)->delimiter(',');

    std::string world_dir, ckpt_path, dataset_id, attention_path, split_name = "test",
                           stub = "none", component;
    int horizon = 96, instances = 20;
    double tolerance = 1e-5;
    bool inject_bug = false, no_meta = false;

    auto* tr = app.add_subcommand("train", "meta-train the selector on a world");
    tr->add_option("--world", world_dir, "world directory")->required();
    auto* lam_opt = tr->add_option("--lambda", rc.train.lambda);
    auto* al_opt = tr->add_option("--alpha", rc.train.alpha);
    auto* ga_opt = tr->add_option("--gamma", rc.train.gamma);
    auto* ep_opt = tr->add_option("--epochs", rc.train.epochs);
    auto* bs_opt = tr->add_option("--batch-size", rc.train.batch_size);
    auto* ho_opt = tr->add_option("--holdout", rc.train.holdout_count);
    auto* nm_flag = tr->add_flag("--no-meta-learning", no_meta, "plain mini-batch training");

    auto* rk = app.add_subcommand("rank", "rank the hub for one dataset/horizon");
    rk->add_option("--world", world_dir)->required();
    rk->add_option("--checkpoint", ckpt_path)->required();
    rk->add_option("--dataset", dataset_id)->required();
    rk->add_option("--horizon", horizon)->required();
    rk->add_option("--export-attention", attention_path, "write the K x P attention CSV here");

    auto* ev = app.add_subcommand("eval", "ranking metrics over a meta split");
    ev->add_option("--world", world_dir)->required();
    ev->add_option("--checkpoint", ckpt_path);
    ev->add_option("--split", split_name)->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--stub", stub, "score source: none (model), oracle, random")
        ->check(CLI::IsMember({"none", "oracle", "random"}));
    auto* ho2_opt = ev->add_option("--holdout", rc.train.holdout_count);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of all gradients");
    gc->add_option("--component", component, "check only this component");
    gc->add_flag("--inject-bug", inject_bug, "add a deliberately broken negative control");
    gc->add_option("--instances", instances);
    gc->add_option("--tolerance", tolerance);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot open config: " + config_path);
            json j = json::parse(in);
            RunConfig flags = rc;  // keep the flag-provided values aside
            apply_config_json(rc, j);
            // flags win over file values
            if (*seed_opt) rc.seed = flags.seed;
            if (*out_opt) rc.out_dir = flags.out_dir;
            if (*prec_opt) rc.precision = flags.precision;
            if (*nd_opt) rc.n_datasets = flags.n_datasets;
            if (*km_opt) rc.k_models = flags.k_models;
            if (*hz_opt) rc.horizons = flags.horizons;
            if (*lam_opt) rc.train.lambda = flags.train.lambda;
            if (*al_opt) rc.train.alpha = flags.train.alpha;
            if (*ga_opt) rc.train.gamma = flags.train.gamma;
            if (*ep_opt) rc.train.epochs = flags.train.epochs;
            if (*bs_opt) rc.train.batch_size = flags.train.batch_size;
            if (*ho_opt || *ho2_opt) rc.train.holdout_count = flags.train.holdout_count;
            if (*nm_flag) rc.train.meta_learning = flags.train.meta_learning;
        }
        if (no_meta) rc.train.meta_learning = false;

        if (gen->parsed()) return cmd_gen_synthetic(rc);
        if (tr->parsed()) return cmd_train(rc, world_dir);
        if (rk->parsed()) return cmd_rank(rc, world_dir, ckpt_path, dataset_id, horizon, attention_path);
        if (ev->parsed()) {
            if (stub == "none" && ckpt_path.empty())
                throw std::runtime_error("eval without --stub needs --checkpoint");
            return cmd_eval(rc, world_dir, ckpt_path, split_name, stub);
        }
        if (gc->parsed()) return cmd_gradcheck(rc, component, inject_bug, instances, tolerance);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
