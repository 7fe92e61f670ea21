#include "tsrank/model_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "tsrank/rng.hpp"

namespace tsrank {

using nlohmann::json;

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::encoder_only: return "encoder_only";
        case Architecture::decoder_only: return "decoder_only";
        case Architecture::encoder_decoder: return "encoder_decoder";
    }
    throw ValueError("bad architecture enum");
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "encoder_only") return Architecture::encoder_only;
    if (s == "decoder_only") return Architecture::decoder_only;
    if (s == "encoder_decoder") return Architecture::encoder_decoder;
    throw ValueError("unknown architecture: " + s);
}

static void znorm_column(std::vector<std::vector<double>>& rows, std::size_t col) {
    double mean = 0;
    for (const auto& r : rows) mean += r[col];
    mean /= static_cast<double>(rows.size());
    double var = 0;
    for (const auto& r : rows) var += (r[col] - mean) * (r[col] - mean);
    double sd = std::sqrt(var / static_cast<double>(rows.size()));
    if (sd < 1e-12) sd = 1.0;
    for (auto& r : rows) r[col] = (r[col] - mean) / sd;
}

std::vector<std::vector<double>> meta_embeddings(const std::vector<ModelCard>& cards,
                                                 const ModelEncoderConfig& cfg) {
    const auto& vocab = domain_vocabulary();
    std::vector<std::vector<double>> out;
    for (const auto& card : cards) {
        std::vector<double> v;
        v.resize(3, 0.0);
        v[static_cast<int>(card.architecture)] = 1.0;
        v.push_back(std::log10(static_cast<double>(card.param_count)));
        v.push_back(std::log10(card.gmacs));
        v.push_back(std::log2(static_cast<double>(card.hidden_dim)));
        for (const auto& d : card.pretrain_domains) {
            if (std::find(vocab.begin(), vocab.end(), d) == vocab.end()) {
                std::ostringstream os;
                os << "unknown domain tag '" << d << "'; vocabulary:";
                for (const auto& w : vocab) os << " " << w;
                throw ValueError(os.str());
            }
        }
        for (const auto& w : vocab) v.push_back(card.pretrain_domains.count(w) ? 1.0 : 0.0);
        v.resize(static_cast<std::size_t>(cfg.d_a), 0.0);
        out.push_back(std::move(v));
    }
    // z-normalize the continuous entries (indices 3..5) across the hub
    if (cfg.hub_znorm)
        for (std::size_t col = 3; col <= 5; ++col) znorm_column(out, col);
    return out;
}

// --- WL topology embedding -------------------------------------------------

static std::vector<int> topo_order_or_throw(const DagGraph& dag) {
    const int n = static_cast<int>(dag.nodes.size());
    std::map<std::string, int> index;
    for (int i = 0; i < n; ++i) {
        if (!index.emplace(dag.nodes[i].id, i).second)
            throw ValueError("duplicate DAG node id: " + dag.nodes[i].id);
    }
    std::vector<std::vector<int>> succ(n);
    std::vector<int> indeg(n, 0);
    for (const auto& [s, t] : dag.edges) {
        auto si = index.find(s), ti = index.find(t);
        if (si == index.end() || ti == index.end())
            throw ValueError("DAG edge endpoint missing: " + s + " -> " + t);
        succ[si->second].push_back(ti->second);
        indeg[ti->second]++;
    }
    std::vector<int> order;
    std::queue<int> q;
    for (int i = 0; i < n; ++i)
        if (indeg[i] == 0) q.push(i);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        order.push_back(u);
        for (int v : succ[u])
            if (--indeg[v] == 0) q.push(v);
    }
    if (static_cast<int>(order.size()) != n) {
        // find one node on a cycle as witness
        std::string witness;
        for (int i = 0; i < n; ++i)
            if (indeg[i] > 0) {
                witness = dag.nodes[i].id;
                break;
            }
        throw ValueError("DAG contains a cycle through node '" + witness + "'");
    }
    return order;
}

std::vector<double> wl_topo_embedding(const DagGraph& dag, int iterations, int d_t) {
    std::vector<double> v(static_cast<std::size_t>(d_t), 0.0);
    const int n = static_cast<int>(dag.nodes.size());
    if (n == 0) return v;
    topo_order_or_throw(dag);  // validates acyclicity, ids, edges

    std::map<std::string, int> index;
    for (int i = 0; i < n; ++i) index[dag.nodes[i].id] = i;
    std::vector<std::vector<int>> in(n), out(n);
    for (const auto& [s, t] : dag.edges) {
        in[index[t]].push_back(index[s]);
        out[index[s]].push_back(index[t]);
    }

    constexpr std::uint64_t kSalt = 0x776c2d73616c74ull;  // fixed hashing salt
    std::vector<std::string> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = dag.nodes[i].op_label;

    auto absorb = [&](const std::string& label) {
        const std::uint64_t h = fnv1a(label, kSalt);
        const int bucket = static_cast<int>(h % static_cast<std::uint64_t>(d_t));
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[bucket] += sign;
    };

    for (int it = 0; it <= iterations; ++it) {
        for (const auto& l : labels) absorb(l);
        if (it == iterations) break;
        std::vector<std::string> next(n);
        for (int i = 0; i < n; ++i) {
            std::vector<std::string> ins, outs;
            for (int p : in[i]) ins.push_back(labels[p]);
            for (int s : out[i]) outs.push_back(labels[s]);
            std::sort(ins.begin(), ins.end());
            std::sort(outs.begin(), outs.end());
            std::string l = labels[i] + "|in(";
            for (const auto& s : ins) l += s + ",";
            l += ")|out(";
            for (const auto& s : outs) l += s + ",";
            l += ")";
            next[i] = std::move(l);
        }
        labels = std::move(next);
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
        for (double& x : v) x /= norm;
    return v;
}

// --- functional embedding ----------------------------------------------------

std::vector<double> probe_signature(const ModelCard& card, const ModelEncoderConfig& cfg) {
    if (card.probe_signature) {
        const std::size_t want = static_cast<std::size_t>(cfg.n_probe) * cfg.probe_horizon;
        if (card.probe_signature->size() != want)
            throw ValueError("probe signature of '" + card.id + "' has length " +
                             std::to_string(card.probe_signature->size()) + ", expected " +
                             std::to_string(want));
        return *card.probe_signature;
    }
    if (!card.forecaster) throw ValueError("model card '" + card.id + "' has no forecaster or signature");
    Rng rng = Rng::substream(cfg.probe_seed, "probe-batch");
    std::vector<double> sig;
    sig.reserve(static_cast<std::size_t>(cfg.n_probe) * cfg.probe_horizon);
    for (int p = 0; p < cfg.n_probe; ++p) {
        // structured probes (sinusoid + AR noise, varied period) separate model
        // behaviors far better than white noise
        const double period = static_cast<double>(rng.uniform_int(16, 72));
        const double amp = rng.uniform(0.5, 2.0);
        const double phase = rng.uniform(0.0, period);
        const double phi = rng.uniform(0.3, 0.9);
        std::vector<double> probe(static_cast<std::size_t>(cfg.probe_len));
        double ar = 0.0;
        for (int t = 0; t < cfg.probe_len; ++t) {
            ar = phi * ar + rng.normal(0.0, 0.3);
            probe[static_cast<std::size_t>(t)] =
                amp * std::sin(2.0 * M_PI * (t + phase) / period) + ar;
        }
        std::vector<double> fc = card.forecaster(probe, cfg.probe_horizon);
        if (static_cast<int>(fc.size()) != cfg.probe_horizon)
            throw ValueError("model '" + card.id + "' returned forecast of length " +
                             std::to_string(fc.size()) + ", expected " +
                             std::to_string(cfg.probe_horizon));
        sig.insert(sig.end(), fc.begin(), fc.end());
    }
    return sig;
}

std::vector<std::vector<double>> functional_embeddings(const std::vector<ModelCard>& cards,
                                                       const ModelEncoderConfig& cfg) {
    const int raw_len = cfg.n_probe * cfg.probe_horizon;
    // fixed seed-pinned random projection raw_len -> d_c, shared across the hub
    Rng prng = Rng::substream(cfg.probe_seed, "probe-projection");
    std::vector<double> proj(static_cast<std::size_t>(raw_len) * cfg.d_c);
    const double s = 1.0 / std::sqrt(static_cast<double>(raw_len));
    for (double& x : proj) x = prng.normal(0.0, s);

    std::vector<std::vector<double>> out;
    for (const auto& card : cards) {
        std::vector<double> raw = probe_signature(card, cfg);
        std::vector<double> v(static_cast<std::size_t>(cfg.d_c), 0.0);
        for (int i = 0; i < raw_len; ++i) {
            if (raw[i] == 0.0) continue;
            for (int j = 0; j < cfg.d_c; ++j)
                v[j] += raw[i] * proj[static_cast<std::size_t>(i) * cfg.d_c + j];
        }
        out.push_back(std::move(v));
    }
    if (cfg.hub_znorm)
        for (int j = 0; j < cfg.d_c; ++j) znorm_column(out, static_cast<std::size_t>(j));
    return out;
}

HubEmbedding encode_hub(const std::vector<ModelCard>& cards, const ParamStore& params,
                        const ModelEncoderConfig& cfg) {
    HubEmbedding hub;
    hub.v_a = meta_embeddings(cards, cfg);
    hub.v_c = functional_embeddings(cards, cfg);
    const int k = static_cast<int>(cards.size());
    const int feat = cfg.d_a + cfg.d_t + cfg.d_c;
    std::vector<real> f(static_cast<std::size_t>(k) * feat);
    for (int i = 0; i < k; ++i) {
        hub.v_t.push_back(wl_topo_embedding(cards[i].dag, cfg.wl_iterations, cfg.d_t));
        hub.model_ids.push_back(cards[i].id);
        real* row = f.data() + static_cast<std::size_t>(i) * feat;
        for (int j = 0; j < cfg.d_a; ++j) row[j] = static_cast<real>(hub.v_a[i][j]);
        for (int j = 0; j < cfg.d_t; ++j) row[cfg.d_a + j] = static_cast<real>(hub.v_t[i][j]);
        for (int j = 0; j < cfg.d_c; ++j)
            row[cfg.d_a + cfg.d_t + j] = static_cast<real>(hub.v_c[i][j]);
    }
    Ten features = tensor({k, feat}, std::move(f));
    Ten wm = params.get("model_enc.wm");  // feat x d
    if (wm->rows() != feat || wm->cols() != cfg.d)
        throw ShapeError("model_enc.wm must be " + std::to_string(feat) + "x" +
                         std::to_string(cfg.d) + ", got " + wm->shape_str());
    hub.e_m = relu(matmul(features, wm));
    return hub;
}

// --- JSON I/O ---------------------------------------------------------------

ModelCard model_card_from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValueError("cannot open model card: " + path);
    json j = json::parse(f);
    ModelCard c;
    c.id = j.at("id").get<std::string>();
    c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    c.param_count = j.at("param_count").get<std::int64_t>();
    c.gmacs = j.at("gmacs").get<double>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    for (const auto& d : j.at("pretrain_domains")) c.pretrain_domains.insert(d.get<std::string>());
    for (const auto& n : j.at("dag").at("nodes"))
        c.dag.nodes.push_back({n.at("id").get<std::string>(), n.at("op_label").get<std::string>()});
    for (const auto& e : j.at("dag").at("edges"))
        c.dag.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    if (j.contains("probe_signature"))
        c.probe_signature = j.at("probe_signature").get<std::vector<double>>();
    return c;
}

void model_card_to_json_file(const ModelCard& card, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["id"] = card.id;
    j["architecture"] = to_string(card.architecture);
    j["param_count"] = card.param_count;
    j["gmacs"] = card.gmacs;
    j["hidden_dim"] = card.hidden_dim;
    j["pretrain_domains"] = card.pretrain_domains;
    j["dag"]["nodes"] = json::array();
    for (const auto& n : card.dag.nodes)
        j["dag"]["nodes"].push_back({{"id", n.id}, {"op_label", n.op_label}});
    j["dag"]["edges"] = json::array();
    for (const auto& [s, t] : card.dag.edges) j["dag"]["edges"].push_back({s, t});
    if (card.probe_signature) j["probe_signature"] = *card.probe_signature;
    std::ofstream f(path);
    if (!f) throw ValueError("cannot write model card: " + path);
    f << j.dump(2) << "\n";
}

}  // namespace tsrank
