#include "tsrank/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace tsrank {

std::string TensorNode::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

bool TensorNode::all_finite() const {
    for (real v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

static std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int s : shape) {
        if (s <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(s);
    }
    return n;
}

Ten tensor(std::vector<int> shape, std::vector<real> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor data length does not match shape");
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

Ten zeros(std::vector<int> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return tensor(std::move(shape), std::vector<real>(n, real(0)), requires_grad);
}

Ten full(std::vector<int> shape, real value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return tensor(std::move(shape), std::vector<real>(n, value), requires_grad);
}

Ten scalar(real value) { return tensor({1}, {value}); }

// --- gemm kernels (ikj order) --------------------------------------------

void gemm_nn(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, real(0));
    for (int i = 0; i < m; ++i) {
        const real* ai = a + static_cast<std::size_t>(i) * k;
        real* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            real av = ai[p];
            if (av == real(0)) continue;
            const real* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[m x n] (+)= a[m x k] * b[n x k]^T
void gemm_nt(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const real* ai = a + static_cast<std::size_t>(i) * k;
        real* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const real* bj = b + static_cast<std::size_t>(j) * k;
            real acc = accumulate ? ci[j] : real(0);
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

// c[k x n] (+)= a[m x k]^T * b[m x n]
void gemm_tn(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(k) * n, real(0));
    for (int i = 0; i < m; ++i) {
        const real* ai = a + static_cast<std::size_t>(i) * k;
        const real* bi = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            real av = ai[p];
            if (av == real(0)) continue;
            real* cp = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

// --- op constructors ------------------------------------------------------

static Ten make_op(std::vector<int> shape, std::vector<real> data, std::vector<Ten> parents,
                   std::function<void(TensorNode&)> backprop) {
    auto t = tensor(std::move(shape), std::move(data));
    t->parents = std::move(parents);
    t->backprop = std::move(backprop);
    return t;
}

Ten matmul(const Ten& a, const Ten& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2)
        throw ShapeError("matmul expects rank-2 tensors, got " + a->shape_str() + " and " +
                         b->shape_str());
    const int m = a->rows(), k = a->cols(), n = b->cols();
    if (k != b->rows())
        throw ShapeError("matmul inner dimension mismatch: " + a->shape_str() + " vs " +
                         b->shape_str());
    std::vector<real> out(static_cast<std::size_t>(m) * n);
    gemm_nn(a->data.data(), b->data.data(), out.data(), m, k, n, false);
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& t) {
        const Ten& a = t.parents[0];
        const Ten& b = t.parents[1];
        a->ensure_grad();
        b->ensure_grad();
        gemm_nt(t.grad.data(), b->data.data(), a->grad.data(), m, n, k, true);
        gemm_tn(a->data.data(), t.grad.data(), b->grad.data(), m, k, n, true);
    });
}

static void require_same_shape(const Ten& a, const Ten& b, const char* op) {
    if (a->shape != b->shape)
        throw ShapeError(std::string(op) + " shape mismatch: " + a->shape_str() + " vs " +
                         b->shape_str());
}

Ten add(const Ten& a, const Ten& b) {
    require_same_shape(a, b, "add");
    std::vector<real> out(a->data);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->data[i];
    return make_op(a->shape, std::move(out), {a, b}, [](TensorNode& t) {
        for (const Ten& p : t.parents) {
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i];
        }
    });
}

Ten sub(const Ten& a, const Ten& b) {
    require_same_shape(a, b, "sub");
    std::vector<real> out(a->data);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->data[i];
    return make_op(a->shape, std::move(out), {a, b}, [](TensorNode& t) {
        t.parents[0]->ensure_grad();
        t.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) {
            t.parents[0]->grad[i] += t.grad[i];
            t.parents[1]->grad[i] -= t.grad[i];
        }
    });
}

Ten mul(const Ten& a, const Ten& b) {
    require_same_shape(a, b, "mul");
    std::vector<real> out(a->data);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->data[i];
    return make_op(a->shape, std::move(out), {a, b}, [](TensorNode& t) {
        const Ten& a = t.parents[0];
        const Ten& b = t.parents[1];
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) {
            a->grad[i] += t.grad[i] * b->data[i];
            b->grad[i] += t.grad[i] * a->data[i];
        }
    });
}

Ten scale(const Ten& a, real c) {
    std::vector<real> out(a->data);
    for (real& v : out) v *= c;
    return make_op(a->shape, std::move(out), {a}, [c](TensorNode& t) {
        t.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) t.parents[0]->grad[i] += c * t.grad[i];
    });
}

Ten add_rowvec(const Ten& a, const Ten& bias) {
    if (bias->rows() != 1 || bias->cols() != a->cols())
        throw ShapeError("add_rowvec bias must be 1x" + std::to_string(a->cols()) + ", got " +
                         bias->shape_str());
    std::vector<real> out(a->data);
    const int n = a->cols();
    for (int i = 0; i < a->rows(); ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += bias->data[j];
    return make_op(a->shape, std::move(out), {a, bias}, [n](TensorNode& t) {
        const Ten& a = t.parents[0];
        const Ten& b = t.parents[1];
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) {
            a->grad[i] += t.grad[i];
            b->grad[i % n] += t.grad[i];
        }
    });
}

Ten softmax(const Ten& x, int axis) {
    if (x->shape.size() > 2) throw ShapeError("softmax supports rank <= 2");
    if (axis < 0 || axis >= static_cast<int>(std::max<std::size_t>(x->shape.size(), 1)))
        throw ShapeError("softmax axis out of range for " + x->shape_str());
    const int r = x->rows(), c = x->cols();
    const bool over_cols = (x->shape.size() < 2) || axis == 1;
    const int groups = over_cols ? r : c;
    const int len = over_cols ? c : r;
    if (len == 0) throw ShapeError("softmax over empty axis");
    std::vector<real> out(x->data.size());
    auto idx = [&](int g, int i) {
        return over_cols ? static_cast<std::size_t>(g) * c + i : static_cast<std::size_t>(i) * c + g;
    };
    for (int g = 0; g < groups; ++g) {
        real mx = x->data[idx(g, 0)];
        for (int i = 1; i < len; ++i) mx = std::max(mx, x->data[idx(g, i)]);
        real z = 0;
        for (int i = 0; i < len; ++i) {
            real e = std::exp(x->data[idx(g, i)] - mx);
            out[idx(g, i)] = e;
            z += e;
        }
        for (int i = 0; i < len; ++i) out[idx(g, i)] /= z;
    }
    return make_op(x->shape, std::move(out), {x}, [over_cols, groups, len, c](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        auto idx = [&](int g, int i) {
            return over_cols ? static_cast<std::size_t>(g) * c + i
                             : static_cast<std::size_t>(i) * c + g;
        };
        for (int g = 0; g < groups; ++g) {
            real dot = 0;
            for (int i = 0; i < len; ++i) dot += t.grad[idx(g, i)] * t.data[idx(g, i)];
            for (int i = 0; i < len; ++i)
                x->grad[idx(g, i)] += t.data[idx(g, i)] * (t.grad[idx(g, i)] - dot);
        }
    });
}

Ten relu(const Ten& x) {
    std::vector<real> out(x->data);
    for (real& v : out) v = std::max(v, real(0));
    return make_op(x->shape, std::move(out), {x}, [](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i)
            if (x->data[i] > 0) x->grad[i] += t.grad[i];
    });
}

Ten gelu(const Ten& x) {
    std::vector<real> out(x->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        real v = x->data[i];
        out[i] = real(0.5) * v * (real(1) + std::erf(v / std::sqrt(real(2))));
    }
    return make_op(x->shape, std::move(out), {x}, [](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        const real inv_sqrt2 = real(1) / std::sqrt(real(2));
        const real inv_sqrt2pi = real(1) / std::sqrt(real(2) * real(M_PI));
        for (std::size_t i = 0; i < t.grad.size(); ++i) {
            real v = x->data[i];
            real cdf = real(0.5) * (real(1) + std::erf(v * inv_sqrt2));
            real pdf = inv_sqrt2pi * std::exp(real(-0.5) * v * v);
            x->grad[i] += t.grad[i] * (cdf + v * pdf);
        }
    });
}

Ten log_clamped(const Ten& x, real floor) {
    std::vector<real> out(x->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x->data[i], floor));
    return make_op(x->shape, std::move(out), {x}, [floor](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i)
            if (x->data[i] > floor) x->grad[i] += t.grad[i] / x->data[i];
    });
}

Ten sum_all(const Ten& x) {
    real s = 0;
    for (real v : x->data) s += v;
    return make_op({1}, {s}, {x}, [](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        for (real& g : x->grad) g += t.grad[0];
    });
}

Ten mean_all(const Ten& x) { return scale(sum_all(x), real(1) / static_cast<real>(x->size())); }

Ten slice_rows(const Ten& x, int first, int count) {
    if (x->shape.size() != 2) throw ShapeError("slice_rows expects rank-2");
    if (first < 0 || count <= 0 || first + count > x->rows())
        throw ShapeError("slice_rows range out of bounds for " + x->shape_str());
    const int c = x->cols();
    std::vector<real> out(x->data.begin() + static_cast<std::size_t>(first) * c,
                          x->data.begin() + static_cast<std::size_t>(first + count) * c);
    return make_op({count, c}, std::move(out), {x}, [first, c](TensorNode& t) {
        const Ten& x = t.parents[0];
        x->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i)
            x->grad[static_cast<std::size_t>(first) * c + i] += t.grad[i];
    });
}

Ten add_n(const std::vector<Ten>& xs) {
    if (xs.empty()) throw ValueError("add_n on empty list");
    for (const Ten& x : xs) require_same_shape(xs[0], x, "add_n");
    std::vector<real> out(xs[0]->data);
    for (std::size_t k = 1; k < xs.size(); ++k)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += xs[k]->data[i];
    return make_op(xs[0]->shape, std::move(out), xs, [](TensorNode& t) {
        for (const Ten& p : t.parents) {
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i];
        }
    });
}

Ten get_element(const Ten& x, int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= x->size())
        throw ShapeError("get_element index out of range");
    return make_op({1}, {x->data[index]}, {x}, [index](TensorNode& t) {
        t.parents[0]->ensure_grad();
        t.parents[0]->grad[index] += t.grad[0];
    });
}

Ten scale_by(const Ten& a, const Ten& s) {
    if (!s->is_scalar()) throw ShapeError("scale_by expects a scalar node");
    std::vector<real> out(a->data);
    for (real& v : out) v *= s->data[0];
    return make_op(a->shape, std::move(out), {a, s}, [](TensorNode& t) {
        const Ten& a = t.parents[0];
        const Ten& s = t.parents[1];
        a->ensure_grad();
        s->ensure_grad();
        for (std::size_t i = 0; i < t.grad.size(); ++i) {
            a->grad[i] += t.grad[i] * s->data[0];
            s->grad[0] += t.grad[i] * a->data[i];
        }
    });
}

Ten scaled_dot_attention(const Ten& q, const Ten& k, const Ten& v) {
    const int d = q->cols();
    if (d == 0 || k->rows() == 0) throw ShapeError("attention requires d > 0 and p > 0");
    if (k->cols() != d)
        throw ShapeError("attention Q/K width mismatch: " + q->shape_str() + " vs " +
                         k->shape_str());
    if (v->rows() != k->rows())
        throw ShapeError("attention K/V length mismatch: " + k->shape_str() + " vs " +
                         v->shape_str());
    // softmax(Q K^T / sqrt(d)) V with d_k = d (single head)
    Ten kt = make_op({k->cols(), k->rows()}, [&] {
        std::vector<real> out(k->size());
        for (int i = 0; i < k->rows(); ++i)
            for (int j = 0; j < k->cols(); ++j)
                out[static_cast<std::size_t>(j) * k->rows() + i] = k->at(i, j);
        return out;
    }(), {k}, [](TensorNode& t) {
        const Ten& k = t.parents[0];
        k->ensure_grad();
        const int r = t.rows(), c = t.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                k->grad[static_cast<std::size_t>(j) * r + i] += t.grad[static_cast<std::size_t>(i) * c + j];
    });
    Ten scores = scale(matmul(q, kt), real(1) / std::sqrt(static_cast<real>(d)));
    Ten attn = softmax(scores, 1);
    return matmul(attn, v);
}

Ten mlp_forward(const Ten& x, const Ten& w1, const Ten& b1, const Ten& w2, const Ten& b2,
                Activation act) {
    if (x->cols() != w1->rows())
        throw ShapeError("mlp layer 1 input mismatch: x " + x->shape_str() + " vs w1 " +
                         w1->shape_str());
    if (w1->cols() != w2->rows())
        throw ShapeError("mlp layer 2 input mismatch: w1 " + w1->shape_str() + " vs w2 " +
                         w2->shape_str());
    Ten h = add_rowvec(matmul(x, w1), b1);
    h = (act == Activation::relu) ? relu(h) : gelu(h);
    return add_rowvec(matmul(h, w2), b2);
}

void backward(const Ten& loss) {
    if (!loss->is_scalar()) throw ValueError("backward requires a scalar loss");
    // iterative post-order DFS over the tape
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] += real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

}  // namespace tsrank
