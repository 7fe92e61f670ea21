#include "tsrank/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace tsrank {

using nlohmann::json;

Ten ParamStore::add(const std::string& name, std::vector<int> shape, std::vector<real> data) {
    if (params_.count(name)) throw ValueError("duplicate parameter name: " + name);
    Ten t = tensor(std::move(shape), std::move(data), true);
    params_.emplace(name, t);
    return t;
}

Ten ParamStore::add_randn(const std::string& name, std::vector<int> shape, Rng& rng, real sd) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    std::vector<real> data(n);
    for (real& v : data) v = static_cast<real>(rng.normal(0.0, sd));
    return add(name, std::move(shape), std::move(data));
}

Ten ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValueError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, t] : params_) t->grad.assign(t->data.size(), real(0));
}

ParamStore ParamStore::clone() const {
    ParamStore out;
    for (const auto& [name, t] : params_) out.add(name, t->shape, t->data);
    return out;
}

// Checkpoint layout: one JSON header line, then a little-endian raw payload.
std::vector<std::uint8_t> ParamStore::snapshot(const std::string& dtype) const {
    if (dtype != "f64" && dtype != "f32") throw ValueError("unknown dtype: " + dtype);
    const std::size_t elem = dtype == "f64" ? 8 : 4;
    json header;
    header["format_version"] = 1;
    header["dtype"] = dtype;
    header["params"] = json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : params_) {
        header["params"].push_back(
            {{"name", name}, {"shape", t->shape}, {"dtype", dtype}, {"offset", offset}});
        offset += t->size() * elem;
    }
    header["payload_bytes"] = offset;
    std::string head = header.dump();
    head.push_back('\n');
    std::vector<std::uint8_t> bytes(head.begin(), head.end());
    bytes.reserve(bytes.size() + offset);
    for (const auto& [name, t] : params_) {
        for (real v : t->data) {
            if (dtype == "f64") {
                double d = static_cast<double>(v);
                std::uint8_t buf[8];
                std::memcpy(buf, &d, 8);
                bytes.insert(bytes.end(), buf, buf + 8);
            } else {
                float f = static_cast<float>(v);
                std::uint8_t buf[4];
                std::memcpy(buf, &f, 4);
                bytes.insert(bytes.end(), buf, buf + 4);
            }
        }
    }
    return bytes;
}

ParamStore ParamStore::from_snapshot(const std::vector<std::uint8_t>& bytes) {
    auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t('\n'));
    if (nl == bytes.end()) throw ValueError("checkpoint: missing header line");
    json header = json::parse(std::string(bytes.begin(), nl));
    const std::size_t payload_off = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (bytes.size() - payload_off != payload_bytes)
        throw ValueError("checkpoint: payload length mismatch");
    ParamStore out;
    for (const auto& p : header.at("params")) {
        std::string dtype = p.at("dtype").get<std::string>();
        const std::size_t elem = dtype == "f64" ? 8 : 4;
        std::vector<int> shape = p.at("shape").get<std::vector<int>>();
        std::size_t n = 1;
        for (int s : shape) n *= static_cast<std::size_t>(s);
        std::size_t off = payload_off + p.at("offset").get<std::size_t>();
        if (off + n * elem > bytes.size()) throw ValueError("checkpoint: offset out of range");
        std::vector<real> data(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (dtype == "f64") {
                double d;
                std::memcpy(&d, bytes.data() + off + i * 8, 8);
                data[i] = static_cast<real>(d);
            } else {
                float f;
                std::memcpy(&f, bytes.data() + off + i * 4, 4);
                data[i] = static_cast<real>(f);
            }
        }
        out.add(p.at("name").get<std::string>(), std::move(shape), std::move(data));
    }
    return out;
}

void ParamStore::save(const std::string& path, const std::string& dtype) const {
    auto bytes = snapshot(dtype);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValueError("cannot write checkpoint: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValueError("cannot read checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return from_snapshot(bytes);
}

void adam_step(ParamStore& params, AdamState& state, real lr) {
    std::map<std::string, std::vector<real>> grads;
    for (const auto& [name, t] : params) {
        if (t->grad.size() != t->data.size())
            throw ValueError("adam_step: missing gradient for " + name);
        grads.emplace(name, t->grad);
    }
    adam_step(params, grads, state, lr);
}

void adam_step(ParamStore& params, const std::map<std::string, std::vector<real>>& grads,
               AdamState& state, real lr) {
    state.step += 1;
    const real bc1 = real(1) - std::pow(state.beta1, static_cast<real>(state.step));
    const real bc2 = real(1) - std::pow(state.beta2, static_cast<real>(state.step));
    for (const auto& [name, t] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw ValueError("adam_step: no gradient for " + name);
        const auto& g = git->second;
        if (g.size() != t->data.size())
            throw ShapeError("adam_step: grad/param shape mismatch for " + name);
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(g.size(), real(0));
        if (v.empty()) v.assign(g.size(), real(0));
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = state.beta1 * m[i] + (real(1) - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (real(1) - state.beta2) * g[i] * g[i];
            const real mhat = m[i] / bc1;
            const real vhat = v[i] / bc2;
            t->data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

std::map<std::string, double> grad_check(const std::function<Ten(ParamStore&)>& f,
                                         ParamStore& params, double epsilon) {
    params.zero_grad();
    Ten loss = f(params);
    backward(loss);
    std::map<std::string, double> result;
    auto rel_err = [](double analytic, double numeric) {
        if (!std::isfinite(numeric) || !std::isfinite(analytic))
            return std::numeric_limits<double>::infinity();
        return std::abs(analytic - numeric) /
               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    };
    const double f0 = static_cast<double>(loss->data[0]);
    const double mach = std::numeric_limits<double>::epsilon();
    for (const auto& [name, t] : params) {
        double worst = 0.0;
        for (std::size_t i = 0; i < t->data.size(); ++i) {
            const real saved = t->data[i];
            const double analytic =
                t->grad.size() == t->data.size() ? static_cast<double>(t->grad[i]) : 0.0;
            // Error of one central-difference estimate, discounting the
            // provable float roundoff floor. Step sizes whose one-sided
            // secants disagree straddle a non-smooth point (a relu kink) and
            // report "no evidence" instead of a bogus mismatch.
            auto attempt = [&](double eps) {
                t->data[i] = saved + static_cast<real>(eps);
                const double up = static_cast<double>(f(params)->data[0]);
                t->data[i] = saved - static_cast<real>(eps);
                const double dn = static_cast<double>(f(params)->data[0]);
                t->data[i] = saved;
                const double numeric = (up - dn) / (2.0 * eps);
                const double left = (f0 - dn) / eps, right = (up - f0) / eps;
                if (rel_err(left, right) > 0.02) return std::numeric_limits<double>::quiet_NaN();
                const double noise =
                    4.0 * mach * (std::abs(up) + std::abs(dn) + std::abs(f0)) / (2.0 * eps);
                if (!std::isfinite(numeric) || !std::isfinite(analytic))
                    return std::numeric_limits<double>::infinity();
                const double gap = std::max(0.0, std::abs(analytic - numeric) - 10.0 * noise);
                return gap / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            };
            double err = attempt(epsilon);
            if (std::isnan(err) || err > 1e-7) {
                for (double scale : {10.0, 100.0, 0.1, 0.01}) {
                    double e2 = attempt(epsilon * scale);
                    if (std::isnan(err) || (!std::isnan(e2) && e2 < err)) err = e2;
                }
            }
            // every step size straddled a kink: no usable evidence either way
            if (std::isnan(err)) err = 0.0;
            worst = std::max(worst, err);
        }
        result[name] = worst;
    }
    return result;
}

}  // namespace tsrank
