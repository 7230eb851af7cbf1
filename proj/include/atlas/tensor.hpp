// tensor.hpp — minimal reverse-mode autodiff over dense double matrices.
// Graphs are built per forward pass (define-by-run); a Tensor is a shared
// handle to one graph node. Scalars are 1x1 tensors.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "atlas/linalg.hpp"
#include "atlas/rng.hpp"

namespace atlas {

namespace detail {
struct TensorNode;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor from_mat(const Mat& m, bool requires_grad = false);
    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    int rows() const;
    int cols() const;
    bool is_scalar() const { return rows() == 1 && cols() == 1; }
    bool requires_grad() const;

    const std::vector<double>& values() const;
    std::vector<double>& values();  // for parameter updates / perturbation
    double value_at(size_t i) const { return values()[i]; }
    double scalar_value() const;
    Mat to_mat() const;

    // Gradient buffer; empty until backward has reached this node.
    const std::vector<double>& grad() const;
    void zero_grad();

    // Stable identity (creation order), used for deterministic traversal.
    uint64_t id() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Core ops. Every op records its backward rule; gradients accumulate across
// fan-out.
Tensor matmul(const Tensor& a, const Tensor& b);
// Left operand is a fixed (non-differentiable) sparse matrix applied to each
// of `batch` row blocks of x.
Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> s, const Tensor& x, int batch = 1);
Tensor add(const Tensor& a, const Tensor& b);
// Adds a 1 x C bias row to every row of a.
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scalar_mul(const Tensor& a, double s);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor elu(const Tensor& a);  // x > 0 ? x : e^x - 1
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Reverse pass from a scalar loss; populates grad on every reachable node
// that requires gradients. Throws if loss is not scalar.
void backward(const Tensor& loss);

// Max over coordinates of |analytic - central difference| /
// max(1e-8, |analytic| + |numeric|). f must be a pure scalar-valued function
// of x (it may capture parameters, which are held fixed).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double h = 1e-5);

struct AdamConfig {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction; step() consumes and zeroes gradients.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();
    long step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

    // Checkpoint access.
    const std::vector<std::vector<double>>& moment1() const { return m_; }
    const std::vector<std::vector<double>>& moment2() const { return v_; }
    void restore(long step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    long step_ = 0;
    AdamConfig cfg_;
};

}  // namespace atlas
