#include "atlas/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace atlas {

namespace detail {

struct TensorNode {
    int rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    uint64_t seq = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(const TensorNode&)> backward_fn;

    size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

using detail::TensorNode;

namespace {

std::atomic<uint64_t> g_seq{1};

std::shared_ptr<TensorNode> make_node(int rows, int cols) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(static_cast<size_t>(rows) * cols, 0.0);
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

TensorNode& node_of(const Tensor& t) {
    if (!t.defined()) throw std::invalid_argument("undefined tensor");
    return *t.node();
}

void set_parents(const std::shared_ptr<TensorNode>& n,
                 std::vector<std::shared_ptr<TensorNode>> parents,
                 std::function<void(const TensorNode&)> fn) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
}

void check_same_shape(const TensorNode& a, const TensorNode& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) +
                                    "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                    "x" + std::to_string(b.cols) + ")");
}

}  // namespace

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
    auto n = make_node(m.rows, m.cols);
    n->value = m.data;
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    auto n = make_node(rows, cols);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v) {
    auto n = make_node(1, 1);
    n->value[0] = v;
    return Tensor(n);
}

int Tensor::rows() const { return node_of(*this).rows; }
int Tensor::cols() const { return node_of(*this).cols; }
bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }
const std::vector<double>& Tensor::values() const { return node_of(*this).value; }
std::vector<double>& Tensor::values() { return node_of(*this).value; }

double Tensor::scalar_value() const {
    const TensorNode& n = node_of(*this);
    if (n.size() != 1) throw std::logic_error("scalar_value on non-scalar tensor");
    return n.value[0];
}

Mat Tensor::to_mat() const {
    const TensorNode& n = node_of(*this);
    Mat m(n.rows, n.cols);
    m.data = n.value;
    return m;
}

const std::vector<double>& Tensor::grad() const { return node_of(*this).grad; }

void Tensor::zero_grad() {
    TensorNode& n = node_of(*this);
    n.grad.assign(n.value.size(), 0.0);
}

uint64_t Tensor::id() const { return node_of(*this).seq; }

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& ta, const Tensor& tb) {
    auto a = ta.node();
    auto b = tb.node();
    if (a->cols != b->rows)
        throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a->cols) + " vs " +
                                    std::to_string(b->rows));
    const int m = a->rows, k = a->cols, n = b->cols;
    auto out = make_node(m, n);
    {
        const double* av = a->value.data();
        const double* bv = b->value.data();
        double* cv = out->value.data();
        for (int i = 0; i < m; ++i) {
            const double* arow = av + static_cast<size_t>(i) * k;
            double* crow = cv + static_cast<size_t>(i) * n;
            for (int p = 0; p < k; ++p) {
                const double x = arow[p];
                const double* brow = bv + static_cast<size_t>(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += x * brow[j];
            }
        }
    }
    set_parents(out, {a, b}, [a, b, m, k, n](const TensorNode& self) {
        const double* g = self.grad.data();
        if (a->requires_grad) {
            a->ensure_grad();
            double* ga = a->grad.data();
            const double* bv = b->value.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[static_cast<size_t>(i) * n + j];
                    double* garow = ga + static_cast<size_t>(i) * k;
                    for (int p = 0; p < k; ++p) garow[p] += gij * bv[static_cast<size_t>(p) * n + j];
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            double* gb = b->grad.data();
            const double* av = a->value.data();
            for (int i = 0; i < m; ++i) {
                const double* arow = av + static_cast<size_t>(i) * k;
                const double* grow = g + static_cast<size_t>(i) * n;
                for (int p = 0; p < k; ++p) {
                    const double x = arow[p];
                    double* gbrow = gb + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += x * grow[j];
                }
            }
        }
    });
    return Tensor(out);
}

Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> s, const Tensor& tx, int batch) {
    auto x = tx.node();
    if (batch < 1) throw std::invalid_argument("sparse_matmul: batch must be >= 1");
    if (x->rows != batch * s->cols())
        throw std::invalid_argument("sparse_matmul: expected " + std::to_string(batch * s->cols()) +
                                    " rows, got " + std::to_string(x->rows));
    auto out = make_node(batch * s->rows(), x->cols);
    s->apply(x->value.data(), out->value.data(), x->cols, batch);
    const int c = x->cols;
    set_parents(out, {x}, [s, x, c, batch](const TensorNode& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        s->apply_transpose_add(self.grad.data(), x->grad.data(), c, batch);
    });
    return Tensor(out);
}

Tensor add(const Tensor& ta, const Tensor& tb) {
    auto a = ta.node();
    auto b = tb.node();
    check_same_shape(*a, *b, "add");
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] + b->value[i];
    set_parents(out, {a, b}, [a, b](const TensorNode& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) b->grad[i] += self.grad[i];
        }
    });
    return Tensor(out);
}

Tensor add_rowvec(const Tensor& ta, const Tensor& tbias) {
    auto a = ta.node();
    auto b = tbias.node();
    if (b->rows != 1 || b->cols != a->cols)
        throw std::invalid_argument("add_rowvec: bias must be 1x" + std::to_string(a->cols));
    auto out = make_node(a->rows, a->cols);
    const int c = a->cols;
    for (int i = 0; i < a->rows; ++i)
        for (int j = 0; j < c; ++j)
            out->value[static_cast<size_t>(i) * c + j] = a->value[static_cast<size_t>(i) * c + j] + b->value[j];
    set_parents(out, {a, b}, [a, b, c](const TensorNode& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < self.rows; ++i)
                for (int j = 0; j < c; ++j) b->grad[j] += self.grad[static_cast<size_t>(i) * c + j];
        }
    });
    return Tensor(out);
}

Tensor sub(const Tensor& ta, const Tensor& tb) {
    auto a = ta.node();
    auto b = tb.node();
    check_same_shape(*a, *b, "sub");
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] - b->value[i];
    set_parents(out, {a, b}, [a, b](const TensorNode& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) b->grad[i] -= self.grad[i];
        }
    });
    return Tensor(out);
}

Tensor mul(const Tensor& ta, const Tensor& tb) {
    auto a = ta.node();
    auto b = tb.node();
    check_same_shape(*a, *b, "mul");
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * b->value[i];
    set_parents(out, {a, b}, [a, b](const TensorNode& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i] * b->value[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.size(); ++i) b->grad[i] += self.grad[i] * a->value[i];
        }
    });
    return Tensor(out);
}

Tensor scalar_mul(const Tensor& ta, double s) {
    auto a = ta.node();
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * s;
    set_parents(out, {a}, [a, s](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i] * s;
    });
    return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    int rows = 0;
    const int cols = parts[0].cols();
    for (const auto& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += p.rows();
    }
    auto out = make_node(rows, cols);
    std::vector<std::shared_ptr<TensorNode>> parents;
    size_t off = 0;
    for (const auto& p : parts) {
        auto n = p.node();
        std::copy(n->value.begin(), n->value.end(), out->value.begin() + off);
        off += n->value.size();
        parents.push_back(n);
    }
    auto parents_copy = parents;
    set_parents(out, std::move(parents), [parents_copy](const TensorNode& self) {
        size_t off = 0;
        for (const auto& p : parents_copy) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += self.grad[off + i];
            }
            off += p->value.size();
        }
    });
    return Tensor(out);
}

Tensor slice_rows(const Tensor& ta, int begin, int end) {
    auto a = ta.node();
    if (begin < 0 || end > a->rows || begin >= end)
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(begin) + ", " +
                                    std::to_string(end) + ") of " + std::to_string(a->rows));
    const int c = a->cols;
    auto out = make_node(end - begin, c);
    std::copy(a->value.begin() + static_cast<size_t>(begin) * c,
              a->value.begin() + static_cast<size_t>(end) * c, out->value.begin());
    set_parents(out, {a}, [a, begin, c](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const size_t off = static_cast<size_t>(begin) * c;
        for (size_t i = 0; i < self.size(); ++i) a->grad[off + i] += self.grad[i];
    });
    return Tensor(out);
}

Tensor concat_cols(const Tensor& ta, const Tensor& tb) {
    auto a = ta.node();
    auto b = tb.node();
    if (a->rows != b->rows) throw std::invalid_argument("concat_cols: row mismatch");
    const int ca = a->cols, cb = b->cols;
    auto out = make_node(a->rows, ca + cb);
    for (int i = 0; i < a->rows; ++i) {
        std::copy(a->value.begin() + static_cast<size_t>(i) * ca,
                  a->value.begin() + static_cast<size_t>(i + 1) * ca,
                  out->value.begin() + static_cast<size_t>(i) * (ca + cb));
        std::copy(b->value.begin() + static_cast<size_t>(i) * cb,
                  b->value.begin() + static_cast<size_t>(i + 1) * cb,
                  out->value.begin() + static_cast<size_t>(i) * (ca + cb) + ca);
    }
    set_parents(out, {a, b}, [a, b, ca, cb](const TensorNode& self) {
        for (int i = 0; i < self.rows; ++i) {
            const double* grow = self.grad.data() + static_cast<size_t>(i) * (ca + cb);
            if (a->requires_grad) {
                a->ensure_grad();
                double* ga = a->grad.data() + static_cast<size_t>(i) * ca;
                for (int j = 0; j < ca; ++j) ga[j] += grow[j];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                double* gb = b->grad.data() + static_cast<size_t>(i) * cb;
                for (int j = 0; j < cb; ++j) gb[j] += grow[ca + j];
            }
        }
    });
    return Tensor(out);
}

Tensor exp(const Tensor& ta) {
    auto a = ta.node();
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = std::exp(a->value[i]);
    set_parents(out, {a}, [a](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i] * self.value[i];
    });
    return Tensor(out);
}

Tensor square(const Tensor& ta) {
    auto a = ta.node();
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * a->value[i];
    set_parents(out, {a}, [a](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.size(); ++i) a->grad[i] += 2.0 * self.grad[i] * a->value[i];
    });
    return Tensor(out);
}

Tensor elu(const Tensor& ta) {
    auto a = ta.node();
    auto out = make_node(a->rows, a->cols);
    for (size_t i = 0; i < out->size(); ++i) {
        const double x = a->value[i];
        out->value[i] = x > 0.0 ? x : std::expm1(x);
    }
    set_parents(out, {a}, [a](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.size(); ++i) {
            const double x = a->value[i];
            const double d = x > 0.0 ? 1.0 : self.value[i] + 1.0;  // e^x for x <= 0
            a->grad[i] += self.grad[i] * d;
        }
    });
    return Tensor(out);
}

Tensor sum_all(const Tensor& ta) {
    auto a = ta.node();
    auto out = make_node(1, 1);
    double s = 0.0;
    for (const double v : a->value) s += v;
    out->value[0] = s;
    set_parents(out, {a}, [a](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const double g = self.grad[0];
        for (size_t i = 0; i < a->value.size(); ++i) a->grad[i] += g;
    });
    return Tensor(out);
}

Tensor mean_all(const Tensor& ta) {
    auto a = ta.node();
    auto out = make_node(1, 1);
    double s = 0.0;
    for (const double v : a->value) s += v;
    const double inv = 1.0 / static_cast<double>(a->value.size());
    out->value[0] = s * inv;
    set_parents(out, {a}, [a, inv](const TensorNode& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const double g = self.grad[0] * inv;
        for (size_t i = 0; i < a->value.size(); ++i) a->grad[i] += g;
    });
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Reverse pass

void backward(const Tensor& loss) {
    TensorNode& root = node_of(loss);
    if (root.size() != 1) throw std::invalid_argument("backward: loss must be scalar");

    // Collect reachable nodes, then process in descending creation order;
    // parents are always created before children in a define-by-run graph.
    std::vector<TensorNode*> nodes;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{&root};
    seen.insert(&root);
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->seq > b->seq; });

    root.ensure_grad();
    root.grad[0] += 1.0;
    for (TensorNode* n : nodes) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double h) {
    if (!x.requires_grad()) throw std::invalid_argument("grad_check: x must require gradients");
    x.zero_grad();
    Tensor loss = f(x);
    backward(loss);
    const std::vector<double> analytic = x.grad();

    double max_err = 0.0;
    auto& vals = x.values();
    for (size_t i = 0; i < vals.size(); ++i) {
        const double saved = vals[i];
        vals[i] = saved + h;
        const double fp = f(x).scalar_value();
        vals[i] = saved - h;
        const double fm = f(x).scalar_value();
        vals[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
    }
    x.zero_grad();
    return max_err;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.values().size(), 0.0);
        v_.emplace_back(p.values().size(), 0.0);
    }
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        TensorNode& n = *params_[k].node();
        if (n.grad.size() != n.value.size())
            throw std::logic_error("Adam::step: parameter " + std::to_string(k) + " has no gradient");
        auto& m = m_[k];
        auto& v = v_[k];
        for (size_t i = 0; i < n.value.size(); ++i) {
            const double g = n.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            n.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
}

void Adam::restore(long step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw std::invalid_argument("Adam::restore: moment count mismatch");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace atlas
