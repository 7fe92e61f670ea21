#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tsrank/param_store.hpp"
#include "tsrank/tensor.hpp"

namespace tsrank {

enum class Architecture { encoder_only, decoder_only, encoder_decoder };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct DagGraph {
    struct Node {
        std::string id;
        std::string op_label;
    };
    std::vector<Node> nodes;
    std::vector<std::pair<std::string, std::string>> edges;  // (src, dst)
};

using Forecaster = std::function<std::vector<double>(const std::vector<double>& history, int horizon)>;

// Serializable description of one hub model. Functional probing uses the
// forecaster when present, otherwise a precomputed raw probe signature.
struct ModelCard {
    std::string id;
    Architecture architecture = Architecture::encoder_only;
    std::int64_t param_count = 1;
    double gmacs = 1.0;
    int hidden_dim = 1;
    std::set<std::string> pretrain_domains;
    DagGraph dag;
    std::optional<std::vector<double>> probe_signature;
    Forecaster forecaster;  // not serialized
};

inline const std::vector<std::string>& domain_vocabulary() {
    static const std::vector<std::string> vocab = {"electricity", "energy",  "traffic", "environment",
                                                   "nature",      "economic", "general"};
    return vocab;
}

struct ModelEncoderConfig {
    int d_a = 16;
    int d_t = 32;
    int d_c = 32;
    int d = 64;
    int wl_iterations = 3;
    int n_probe = 4;
    int probe_len = 96;
    int probe_horizon = 96;
    std::uint64_t probe_seed = 0x70726f6265ull;  // pins the shared probe batch and projection
    bool hub_znorm = true;  // z-normalize continuous features across the hub
};

struct HubEmbedding {
    Ten e_m;                           // K x d
    std::vector<std::vector<double>> v_a, v_t, v_c;  // per-model component vectors
    std::vector<std::string> model_ids;
};

// Architecture one-hot + log-scaled capacity features + domain multi-hot,
// continuous entries z-normalized across the hub, padded to d_a. The hub
// context supplies the normalization statistics.
std::vector<std::vector<double>> meta_embeddings(const std::vector<ModelCard>& cards,
                                                 const ModelEncoderConfig& cfg);

// Weisfeiler-Lehman relabeling with signed feature hashing into d_t buckets,
// L2-normalized. Replaces a trained graph embedding with a deterministic one.
std::vector<double> wl_topo_embedding(const DagGraph& dag, int iterations = 3, int d_t = 32);

std::vector<std::vector<double>> functional_embeddings(const std::vector<ModelCard>& cards,
                                                       const ModelEncoderConfig& cfg);

// Raw concatenated probe forecasts before projection (n_probe * probe_horizon values).
std::vector<double> probe_signature(const ModelCard& card, const ModelEncoderConfig& cfg);

// E_m = relu([v_a, v_t, v_c] W_m^T); W_m must be registered as "model_enc.wm"
// with shape (d_a+d_t+d_c) x d.
HubEmbedding encode_hub(const std::vector<ModelCard>& cards, const ParamStore& params,
                        const ModelEncoderConfig& cfg);

// model-card JSON file I/O
ModelCard model_card_from_json_file(const std::string& path);
void model_card_to_json_file(const ModelCard& card, const std::string& path);

}  // namespace tsrank
