#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsrank {

#ifdef TSRANK_USE_F32
using real = float;
#else
using real = double;
#endif

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TensorNode;
using Ten = std::shared_ptr<TensorNode>;

// Dense row-major tensor node. Each forward pass builds a fresh tape of these;
// backward() walks the tape in reverse topological order. Parameter nodes
// (requires_grad) persist across steps and accumulate gradients until zeroed.
class TensorNode {
public:
    std::vector<int> shape;
    std::vector<real> data;
    bool requires_grad = false;
    std::vector<real> grad;  // empty until first backward touches this node

    std::vector<Ten> parents;
    std::function<void(TensorNode&)> backprop;  // pulls from this->grad into parents

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    std::size_t size() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }

    real& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    real at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), real(0));
    }
    std::string shape_str() const;
    bool all_finite() const;
};

Ten tensor(std::vector<int> shape, std::vector<real> data, bool requires_grad = false);
Ten zeros(std::vector<int> shape, bool requires_grad = false);
Ten full(std::vector<int> shape, real value, bool requires_grad = false);
Ten scalar(real value);

// --- differentiable ops -------------------------------------------------

Ten matmul(const Ten& a, const Ten& b);
Ten add(const Ten& a, const Ten& b);
Ten sub(const Ten& a, const Ten& b);
Ten mul(const Ten& a, const Ten& b);  // elementwise
Ten scale(const Ten& a, real c);
Ten add_rowvec(const Ten& a, const Ten& bias);  // bias 1xN broadcast over rows
Ten softmax(const Ten& x, int axis);
Ten relu(const Ten& x);
Ten gelu(const Ten& x);
Ten log_clamped(const Ten& x, real floor = real(1e-12));
Ten sum_all(const Ten& x);
Ten mean_all(const Ten& x);
Ten slice_rows(const Ten& x, int first, int count);
Ten add_n(const std::vector<Ten>& xs);            // fixed-order reduction
Ten get_element(const Ten& x, int index);         // 1x1 view of one element
Ten scale_by(const Ten& a, const Ten& s_scalar);  // s is a 1x1 node

Ten scaled_dot_attention(const Ten& q, const Ten& k, const Ten& v);

enum class Activation { relu, gelu };
// 2-layer affine-activation-affine applied row-wise; layers named
// <prefix>.w1/.b1/.w2/.b2 in the given order.
Ten mlp_forward(const Ten& x, const Ten& w1, const Ten& b1, const Ten& w2, const Ten& b2,
                Activation act);

void backward(const Ten& loss);

// raw gemm helpers shared by forward and backward kernels
void gemm_nn(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate);
void gemm_nt(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate);
void gemm_tn(const real* a, const real* b, real* c, int m, int k, int n, bool accumulate);

}  // namespace tsrank
