#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsrank/rng.hpp"
#include "tsrank/tensor.hpp"

namespace tsrank {

// Ordered (lexicographic) map of named trainable tensors: the theta of the
// whole model. Snapshot/restore round-trips are bit-identical.
class ParamStore {
public:
    Ten add(const std::string& name, std::vector<int> shape, std::vector<real> data);
    Ten add_randn(const std::string& name, std::vector<int> shape, Rng& rng, real sd);
    Ten get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    ParamStore clone() const;  // fresh nodes, copied values

    std::vector<std::uint8_t> snapshot(const std::string& dtype = "f64") const;
    static ParamStore from_snapshot(const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path, const std::string& dtype = "f64") const;
    static ParamStore load(const std::string& path);

private:
    std::map<std::string, Ten> params_;
};

struct AdamState {
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
    std::int64_t step = 0;
    std::map<std::string, std::vector<real>> m;
    std::map<std::string, std::vector<real>> v;
};

// One Adam update from params' accumulated grads (or an explicit grad map).
void adam_step(ParamStore& params, AdamState& state, real lr);
void adam_step(ParamStore& params, const std::map<std::string, std::vector<real>>& grads,
               AdamState& state, real lr);

// Central finite differences vs. analytic grads; returns per-parameter max of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
std::map<std::string, double> grad_check(const std::function<Ten(ParamStore&)>& f,
                                         ParamStore& params, double epsilon = 1e-6);

}  // namespace tsrank
