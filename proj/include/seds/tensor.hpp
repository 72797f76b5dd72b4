#pragma once

// Dense tensors with reverse-mode automatic differentiation.
// Every operation records a node on the implicit graph; backward() walks
// the graph once in reverse topological order and accumulates leaf grads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace seds {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;
using Mask = std::vector<std::uint8_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backprop;  // empty for leaves

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Reverse topological order of the graph rooted at one node.
template <typename T>
struct Tape {
    std::vector<TensorNode<T>*> order;  // topological: parents before children
};

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode<T>> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode<T>>();
        n->value.assign(seds::numel(shape), T(0));
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.data().begin(), t.data().end(), v);
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (seds::numel(shape) != data.size())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        auto n = std::make_shared<TensorNode<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t rank() const { return n_->shape.size(); }
    std::size_t numel() const { return n_->value.size(); }
    std::size_t dim(std::size_t i) const { return n_->shape.at(i); }
    std::size_t rows() const { return n_->shape.at(0); }
    std::size_t cols() const { return n_->shape.at(1); }

    std::vector<T>& data() { return n_->value; }
    const std::vector<T>& data() const { return n_->value; }
    std::vector<T>& grad() { return n_->grad; }
    const std::vector<T>& grad() const { return n_->grad; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }

    T item() const {
        if (n_->value.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(n_->shape));
        return n_->value[0];
    }

    T& at(std::size_t i, std::size_t j) { return n_->value[i * cols() + j]; }
    T at(std::size_t i, std::size_t j) const { return n_->value[i * cols() + j]; }

    std::shared_ptr<TensorNode<T>> node() const { return n_; }

    void zero_grad() { n_->grad.assign(n_->value.size(), T(0)); }

    Tape<T> tape() const {
        Tape<T> tp;
        std::unordered_set<TensorNode<T>*> seen;
        // iterative post-order DFS
        struct Frame { TensorNode<T>* node; std::size_t next; };
        std::vector<Frame> stack{{n_.get(), 0}};
        seen.insert(n_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.node->parents.size()) {
                TensorNode<T>* p = f.node->parents[f.next++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                tp.order.push_back(f.node);
                stack.pop_back();
            }
        }
        return tp;
    }

    // Reverse-mode sweep from a scalar root. Leaf grads accumulate additively.
    void backward() const {
        if (n_->value.size() != 1)
            throw ShapeError("backward() requires a scalar root, got " + shape_str(n_->shape));
        if (!n_->requires_grad) return;
        Tape<T> tp = tape();
        for (TensorNode<T>* node : tp.order)
            if (node != n_.get()) node->ensure_grad();
        n_->ensure_grad();
        n_->grad[0] += T(1);
        for (auto it = tp.order.rbegin(); it != tp.order.rend(); ++it) {
            TensorNode<T>* node = *it;
            if (node->backprop) node->backprop(*node);
        }
    }

private:
    std::shared_ptr<TensorNode<T>> n_;
};

template <typename T>
inline Tensor<T> make_op(Shape shape, std::vector<T> value,
                         std::vector<Tensor<T>> parents,
                         std::function<void(TensorNode<T>&)> backprop) {
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const auto& p : parents) {
        n->parents.push_back(p.node());
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return Tensor<T>(n);
}

template <typename T>
inline bool has_nonfinite(const Tensor<T>& t) {
    for (T v : t.data())
        if (!std::isfinite(static_cast<double>(v))) return true;
    return false;
}

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](TensorNode<T>& self) {
        for (int p = 0; p < 2; ++p) {
            auto& par = *self.parents[p];
            if (!par.requires_grad) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i];
            if (pb.requires_grad) pb.grad[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
    return make_op<T>(a.shape(), std::move(v), {a}, [c](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
    });
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, T c) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + c;
    return make_op<T>(a.shape(), std::move(v), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

// Broadcast multiply by a scalar tensor (used by the learnable temperature).
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s) {
    if (s.numel() != 1) throw ShapeError("mul_scalar: scale must be scalar");
    T c = s.item();
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
    return make_op<T>(a.shape(), std::move(v), {a, s}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& ps = *self.parents[1];
        T c = ps.value[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * c;
            if (ps.requires_grad) ps.grad[0] += self.grad[i] * pa.value[i];
        }
    });
}

// Bias broadcast: a[m x n] + b[n].
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 1 || a.cols() != b.dim(0))
        throw ShapeError("add_rowvec: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    std::size_t m = a.rows(), n = a.cols();
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = a.data()[i * n + j] + b.data()[j];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [m, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (pa.requires_grad) pa.grad[i * n + j] += self.grad[i * n + j];
                if (pb.requires_grad) pb.grad[j] += self.grad[i * n + j];
            }
    });
}

// Multiply each row i of a[m x n] by constant weight w[i]; no grad to weights.
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& a, const std::vector<T>& w) {
    if (a.rank() != 2 || a.rows() != w.size()) throw ShapeError("scale_rows: bad weight length");
    std::size_t m = a.rows(), n = a.cols();
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = a.data()[i * n + j] * w[i];
    return make_op<T>(a.shape(), std::move(v), {a}, [m, n, w](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += self.grad[i * n + j] * w[i];
    });
}

// ---------------------------------------------------------------------------
// Matrix products and layout

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<T> v(m * n, T(0));
    const T* A = a.data().data();
    const T* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            T aip = A[i * k + p];
            if (aip == T(0)) continue;
            const T* brow = B + p * n;
            T* crow = v.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    return make_op<T>({m, n}, std::move(v), {a, b}, [m, k, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* G = self.grad.data();
        if (pa.requires_grad) {
            // dA = dC * B^T
            const T* B = pb.value.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T acc = T(0);
                    for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                    pa.grad[i * k + p] += acc;
                }
        }
        if (pb.requires_grad) {
            // dB = A^T * dC
            const T* A = pa.value.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T aip = A[i * k + p];
                    if (aip == T(0)) continue;
                    for (std::size_t j = 0; j < n; ++j) pb.grad[p * n + j] += aip * G[i * n + j];
                }
        }
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank-2 only");
    std::size_t m = a.rows(), n = a.cols();
    std::vector<T> v(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[j * m + i] = a.data()[i * n + j];
    return make_op<T>({n, m}, std::move(v), {a}, [m, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += self.grad[j * m + i];
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (numel(shape) != a.numel())
        throw ShapeError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                         shape_str(shape));
    return make_op<T>(std::move(shape), std::vector<T>(a.data()), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t start, std::size_t len) {
    if (a.rank() != 2 || start + len > a.rows()) throw ShapeError("slice_rows: out of range");
    std::size_t n = a.cols();
    std::vector<T> v(a.data().begin() + start * n, a.data().begin() + (start + len) * n);
    return make_op<T>({len, n}, std::move(v), {a}, [start, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[start * n + i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t start, std::size_t len) {
    if (a.rank() != 2 || start + len > a.cols()) throw ShapeError("slice_cols: out of range");
    std::size_t m = a.rows(), n = a.cols();
    std::vector<T> v(m * len);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j) v[i * len + j] = a.data()[i * n + start + j];
    return make_op<T>({m, len}, std::move(v), {a}, [m, n, start, len](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < len; ++j)
                pa.grad[i * n + start + j] += self.grad[i * len + j];
    });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& idx) {
    if (a.rank() != 2) throw ShapeError("gather_rows: rank-2 only");
    std::size_t n = a.cols();
    std::vector<T> v(idx.size() * n);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(a.data().begin() + idx[i] * n, n, v.begin() + i * n);
    }
    return make_op<T>({idx.size(), n}, std::move(v), {a}, [idx, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) pa.grad[idx[i] * n + j] += self.grad[i * n + j];
    });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty input");
    std::size_t n = xs[0].cols(), m = 0;
    for (const auto& x : xs) {
        if (x.rank() != 2 || x.cols() != n) throw ShapeError("concat_rows: column mismatch");
        m += x.rows();
    }
    std::vector<T> v;
    v.reserve(m * n);
    for (const auto& x : xs) v.insert(v.end(), x.data().begin(), x.data().end());
    std::vector<std::size_t> sizes;
    for (const auto& x : xs) sizes.push_back(x.numel());
    return make_op<T>({m, n}, std::move(v), xs, [sizes](TensorNode<T>& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            auto& par = *self.parents[p];
            if (par.requires_grad)
                for (std::size_t i = 0; i < sizes[p]; ++i) par.grad[i] += self.grad[off + i];
            off += sizes[p];
        }
    });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input");
    std::size_t m = xs[0].rows(), n = 0;
    for (const auto& x : xs) {
        if (x.rank() != 2 || x.rows() != m) throw ShapeError("concat_cols: row mismatch");
        n += x.cols();
    }
    std::vector<T> v(m * n);
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::size_t c = x.cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(x.data().begin() + i * c, c, v.begin() + i * n + off);
        off += c;
    }
    std::vector<std::size_t> widths;
    for (const auto& x : xs) widths.push_back(x.cols());
    return make_op<T>({m, n}, std::move(v), xs, [m, n, widths](TensorNode<T>& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            auto& par = *self.parents[p];
            std::size_t c = widths[p];
            if (par.requires_grad)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        par.grad[i * c + j] += self.grad[i * n + off + j];
            off += c;
        }
    });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
    return make_op<T>(a.shape(), std::move(v), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa.value[i] > T(0)) pa.grad[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    const T inv_sqrt2 = T(0.70710678118654752440);
    const T inv_sqrt2pi = T(0.39894228040143267794);
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) {
        T x = a.data()[i];
        v[i] = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
    }
    return make_op<T>(a.shape(), std::move(v), {a},
                      [inv_sqrt2, inv_sqrt2pi](TensorNode<T>& self) {
                          auto& pa = *self.parents[0];
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                              T x = pa.value[i];
                              T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
                              T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
                              pa.grad[i] += self.grad[i] * (cdf + x * pdf);
                          }
                      });
}

template <typename T>
Tensor<T> exp_t(const Tensor<T>& a) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a.data()[i]);
    return make_op<T>(a.shape(), std::move(v), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] * self.value[i];
    });
}

template <typename T>
Tensor<T> log_t(const Tensor<T>& a) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a.data()[i]);
    return make_op<T>(a.shape(), std::move(v), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] / pa.value[i];
    });
}

template <typename T>
Tensor<T> clip(const Tensor<T>& a, T lo, T hi) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(std::max(a.data()[i], lo), hi);
    return make_op<T>(a.shape(), std::move(v), {a}, [lo, hi](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa.value[i] > lo && pa.value[i] < hi) pa.grad[i] += self.grad[i];
    });
}

// x mod period, into [0, period). Gradient is 1 almost everywhere.
template <typename T>
Tensor<T> wrap_mod(const Tensor<T>& a, T period) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) {
        T x = a.data()[i];
        T y = x - period * std::floor(x / period);
        if (y >= period) y -= period;
        if (y < T(0)) y += period;
        v[i] = y;
    }
    return make_op<T>(a.shape(), std::move(v), {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

// Softmax along rows (axis=1) or columns (axis=0) of a 2-D tensor, max-stabilized.
// Masked entries (mask=0, same layout) are excluded and output 0 there.
template <typename T>
Tensor<T> softmax2d(const Tensor<T>& a, int axis, const Mask* mask = nullptr) {
    if (a.rank() != 2) throw ShapeError("softmax2d: rank-2 only");
    if (axis != 0 && axis != 1) throw ShapeError("softmax2d: axis must be 0 or 1");
    if (mask && mask->size() != a.numel()) throw ShapeError("softmax2d: mask size mismatch");
    std::size_t m = a.rows(), n = a.cols();
    std::size_t outer = axis == 1 ? m : n;
    std::size_t inner = axis == 1 ? n : m;
    auto index = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * n + i : i * n + o; };
    std::vector<T> v(a.numel(), T(0));
    for (std::size_t o = 0; o < outer; ++o) {
        T mx = -std::numeric_limits<T>::infinity();
        bool any = false;
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t k = index(o, i);
            if (mask && !(*mask)[k]) continue;
            any = true;
            mx = std::max(mx, a.data()[k]);
        }
        if (!any) throw NumericError("softmax2d: fully masked slice " + std::to_string(o));
        T sum = T(0);
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t k = index(o, i);
            if (mask && !(*mask)[k]) continue;
            v[k] = std::exp(a.data()[k] - mx);
            sum += v[k];
        }
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t k = index(o, i);
            if (mask && !(*mask)[k]) continue;
            v[k] /= sum;
        }
    }
    Mask mcopy = mask ? *mask : Mask();
    return make_op<T>(a.shape(), std::move(v), {a},
                      [axis, m, n, outer, inner, mcopy](TensorNode<T>& self) {
                          auto& pa = *self.parents[0];
                          auto index = [&](std::size_t o, std::size_t i) {
                              return axis == 1 ? o * n + i : i * n + o;
                          };
                          for (std::size_t o = 0; o < outer; ++o) {
                              T dot = T(0);
                              for (std::size_t i = 0; i < inner; ++i) {
                                  std::size_t k = index(o, i);
                                  if (!mcopy.empty() && !mcopy[k]) continue;
                                  dot += self.value[k] * self.grad[k];
                              }
                              for (std::size_t i = 0; i < inner; ++i) {
                                  std::size_t k = index(o, i);
                                  if (!mcopy.empty() && !mcopy[k]) continue;
                                  pa.grad[k] += self.value[k] * (self.grad[k] - dot);
                              }
                          }
                      });
}

// Layer normalization over the last axis of a [m x d] tensor.
// Zero-variance rows normalize to zeros (eps inside the denominator).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5)) {
    if (x.rank() != 2) throw ShapeError("layer_norm: rank-2 only");
    std::size_t m = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) throw ShapeError("layer_norm: gain/bias size");
    std::vector<T> v(x.numel());
    std::vector<T> mu(m), inv(m);
    for (std::size_t i = 0; i < m; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < d; ++j) s += x.data()[i * d + j];
        mu[i] = s / T(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            T c = x.data()[i * d + j] - mu[i];
            var += c * c;
        }
        var /= T(d);
        inv[i] = T(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            T xh = (x.data()[i * d + j] - mu[i]) * inv[i];
            v[i * d + j] = xh * gain.data()[j] + bias.data()[j];
        }
    }
    return make_op<T>(x.shape(), std::move(v), {x, gain, bias},
                      [m, d, mu, inv](TensorNode<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pg = *self.parents[1];
                          auto& pb = *self.parents[2];
                          for (std::size_t i = 0; i < m; ++i) {
                              T sum_dy = T(0), sum_dyxh = T(0);
                              for (std::size_t j = 0; j < d; ++j) {
                                  T xh = (px.value[i * d + j] - mu[i]) * inv[i];
                                  T dy = self.grad[i * d + j] * pg.value[j];
                                  sum_dy += dy;
                                  sum_dyxh += dy * xh;
                                  if (pg.requires_grad) pg.grad[j] += self.grad[i * d + j] * xh;
                                  if (pb.requires_grad) pb.grad[j] += self.grad[i * d + j];
                              }
                              if (!px.requires_grad) continue;
                              for (std::size_t j = 0; j < d; ++j) {
                                  T xh = (px.value[i * d + j] - mu[i]) * inv[i];
                                  T dy = self.grad[i * d + j] * pg.value[j];
                                  px.grad[i * d + j] +=
                                      inv[i] * (dy - sum_dy / T(d) - xh * sum_dyxh / T(d));
                              }
                          }
                      });
}

// Row-wise L2 normalization: y = x / max(||x||, eps).
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps = T(1e-12)) {
    if (x.rank() != 2) throw ShapeError("l2_normalize_rows: rank-2 only");
    std::size_t m = x.rows(), d = x.cols();
    std::vector<T> v(x.numel());
    std::vector<T> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < d; ++j) s += x.data()[i * d + j] * x.data()[i * d + j];
        norms[i] = std::max(std::sqrt(s), eps);
        for (std::size_t j = 0; j < d; ++j) v[i * d + j] = x.data()[i * d + j] / norms[i];
    }
    return make_op<T>(x.shape(), std::move(v), {x}, [m, d, norms, eps](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i) {
            if (norms[i] <= eps) {
                for (std::size_t j = 0; j < d; ++j)
                    px.grad[i * d + j] += self.grad[i * d + j] / eps;
                continue;
            }
            T dot = T(0);
            for (std::size_t j = 0; j < d; ++j) dot += self.value[i * d + j] * self.grad[i * d + j];
            for (std::size_t j = 0; j < d; ++j)
                px.grad[i * d + j] += (self.grad[i * d + j] - self.value[i * d + j] * dot) / norms[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T s = T(0);
    for (T x : a.data()) s += x;
    return make_op<T>({1}, {s}, {a}, [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / T(a.numel()));
}

// Mean over entries where mask is nonzero.
template <typename T>
Tensor<T> masked_mean(const Tensor<T>& a, const Mask& mask) {
    if (mask.size() != a.numel()) throw ShapeError("masked_mean: mask size mismatch");
    std::size_t cnt = 0;
    T s = T(0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            s += a.data()[i];
            ++cnt;
        }
    if (cnt == 0) throw NumericError("masked_mean: empty mask");
    T invc = T(1) / T(cnt);
    return make_op<T>({1}, {s * invc}, {a}, [mask, invc](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) pa.grad[i] += self.grad[0] * invc;
    });
}

// Row-wise log-sum-exp of a [m x n] tensor -> [m].
template <typename T>
Tensor<T> logsumexp_rows(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("logsumexp_rows: rank-2 only");
    std::size_t m = a.rows(), n = a.cols();
    std::vector<T> v(m);
    for (std::size_t i = 0; i < m; ++i) {
        T mx = a.data()[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.data()[i * n + j]);
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += std::exp(a.data()[i * n + j] - mx);
        v[i] = mx + std::log(s);
    }
    return make_op<T>({m}, std::move(v), {a}, [m, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                pa.grad[i * n + j] +=
                    self.grad[i] * std::exp(pa.value[i * n + j] - self.value[i]);
    });
}

template <typename T>
Tensor<T> diag(const Tensor<T>& a) {
    if (a.rank() != 2 || a.rows() != a.cols()) throw ShapeError("diag: square matrix required");
    std::size_t n = a.rows();
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a.data()[i * n + i];
    return make_op<T>({n}, std::move(v), {a}, [n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < n; ++i) pa.grad[i * n + i] += self.grad[i];
    });
}

// Mean over each consecutive block of `block` rows: [B*block x C] -> [B x C].
template <typename T>
Tensor<T> block_mean_rows(const Tensor<T>& a, std::size_t block) {
    if (a.rank() != 2 || block == 0 || a.rows() % block != 0)
        throw ShapeError("block_mean_rows: rows not divisible by block");
    std::size_t b = a.rows() / block, c = a.cols();
    std::vector<T> v(b * c, T(0));
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < block; ++k)
            for (std::size_t j = 0; j < c; ++j)
                v[i * c + j] += a.data()[(i * block + k) * c + j];
    T invb = T(1) / T(block);
    for (T& x : v) x *= invb;
    return make_op<T>({b, c}, std::move(v), {a}, [b, c, block, invb](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t k = 0; k < block; ++k)
                for (std::size_t j = 0; j < c; ++j)
                    pa.grad[(i * block + k) * c + j] += self.grad[i * c + j] * invb;
    });
}

// Assemble scalar nodes into a [rows x cols] matrix (row-major order).
template <typename T>
Tensor<T> stack_scalars(const std::vector<Tensor<T>>& xs, std::size_t rows, std::size_t cols) {
    if (xs.size() != rows * cols) throw ShapeError("stack_scalars: count mismatch");
    std::vector<T> v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) v[i] = xs[i].item();
    return make_op<T>({rows, cols}, std::move(v), xs, [](TensorNode<T>& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = *self.parents[i];
            if (p.requires_grad) p.grad[0] += self.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Interpolated gather (circular), the sampling primitive behind offset attention.
// out[t,i] = (1-w)*seq[floor(p)] + w*seq[(floor(p)+1) % T], w = p - floor(p).
// Differentiable in both seq and pos.

template <typename T>
Tensor<T> interp_gather(const Tensor<T>& seq, const Tensor<T>& pos) {
    if (seq.rank() != 2 || pos.rank() != 2) throw ShapeError("interp_gather: rank-2 inputs");
    std::size_t t_len = seq.rows(), d = seq.cols();
    std::size_t tq = pos.rows(), n = pos.cols();
    std::vector<T> v(tq * n * d);
    for (std::size_t t = 0; t < tq; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            T p = pos.data()[t * n + i];
            if (!(p >= T(0) && p < T(t_len)))
                throw NumericError("interp_gather: position " + std::to_string((double)p) +
                                   " outside [0," + std::to_string(t_len) + ")");
            std::size_t j0 = static_cast<std::size_t>(std::floor(p));
            std::size_t j1 = (j0 + 1) % t_len;
            T w = p - T(j0);
            for (std::size_t c = 0; c < d; ++c)
                v[(t * n + i) * d + c] =
                    (T(1) - w) * seq.data()[j0 * d + c] + w * seq.data()[j1 * d + c];
        }
    return make_op<T>({tq, n, d}, std::move(v), {seq, pos}, [t_len, d, tq, n](TensorNode<T>& self) {
        auto& ps = *self.parents[0];
        auto& pp = *self.parents[1];
        for (std::size_t t = 0; t < tq; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                T p = pp.value[t * n + i];
                std::size_t j0 = static_cast<std::size_t>(std::floor(p));
                std::size_t j1 = (j0 + 1) % t_len;
                T w = p - T(j0);
                T dpos = T(0);
                for (std::size_t c = 0; c < d; ++c) {
                    T g = self.grad[(t * n + i) * d + c];
                    if (ps.requires_grad) {
                        ps.grad[j0 * d + c] += (T(1) - w) * g;
                        ps.grad[j1 * d + c] += w * g;
                    }
                    dpos += (ps.value[j1 * d + c] - ps.value[j0 * d + c]) * g;
                }
                if (pp.requires_grad) pp.grad[t * n + i] += dpos;
            }
    });
}

// scores[t,i] = sum_c k3[t,i,c] * q[t,c]   (k3 is [T x N x D], q is [T x D])
template <typename T>
Tensor<T> rowdot3(const Tensor<T>& k3, const Tensor<T>& q) {
    if (k3.rank() != 3 || q.rank() != 2 || k3.dim(0) != q.rows() || k3.dim(2) != q.cols())
        throw ShapeError("rowdot3: incompatible shapes");
    std::size_t t_len = k3.dim(0), n = k3.dim(1), d = k3.dim(2);
    std::vector<T> v(t_len * n, T(0));
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                v[t * n + i] += k3.data()[(t * n + i) * d + c] * q.data()[t * d + c];
    return make_op<T>({t_len, n}, std::move(v), {k3, q}, [t_len, n, d](TensorNode<T>& self) {
        auto& pk = *self.parents[0];
        auto& pq = *self.parents[1];
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                T g = self.grad[t * n + i];
                for (std::size_t c = 0; c < d; ++c) {
                    if (pk.requires_grad)
                        pk.grad[(t * n + i) * d + c] += g * pq.value[t * d + c];
                    if (pq.requires_grad)
                        pq.grad[t * d + c] += g * pk.value[(t * n + i) * d + c];
                }
            }
    });
}

// out[t,c] = sum_i v3[t,i,c] * w[t,i]
template <typename T>
Tensor<T> weight3(const Tensor<T>& v3, const Tensor<T>& w) {
    if (v3.rank() != 3 || w.rank() != 2 || v3.dim(0) != w.rows() || v3.dim(1) != w.cols())
        throw ShapeError("weight3: incompatible shapes");
    std::size_t t_len = v3.dim(0), n = v3.dim(1), d = v3.dim(2);
    std::vector<T> v(t_len * d, T(0));
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c)
                v[t * d + c] += v3.data()[(t * n + i) * d + c] * w.data()[t * n + i];
    return make_op<T>({t_len, d}, std::move(v), {v3, w}, [t_len, n, d](TensorNode<T>& self) {
        auto& pv = *self.parents[0];
        auto& pw = *self.parents[1];
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < d; ++c) {
                    T g = self.grad[t * d + c];
                    if (pv.requires_grad)
                        pv.grad[(t * n + i) * d + c] += g * pw.value[t * n + i];
                    if (pw.requires_grad)
                        pw.grad[t * n + i] += g * pv.value[(t * n + i) * d + c];
                }
    });
}

// y[f,i,c] = sum_j A[i,j] x[f,j,c] with a constant [K x K] mixing matrix.
// x is laid out as [F*K x C].
template <typename T>
Tensor<T> adjacency_mix(const std::vector<T>& A, std::size_t K, const Tensor<T>& x) {
    if (x.rank() != 2 || A.size() != K * K || x.rows() % K != 0)
        throw ShapeError("adjacency_mix: incompatible shapes");
    std::size_t f = x.rows() / K, c = x.cols();
    std::vector<T> v(x.numel(), T(0));
    for (std::size_t fr = 0; fr < f; ++fr)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) {
                T a = A[i * K + j];
                if (a == T(0)) continue;
                for (std::size_t ch = 0; ch < c; ++ch)
                    v[(fr * K + i) * c + ch] += a * x.data()[(fr * K + j) * c + ch];
            }
    return make_op<T>(x.shape(), std::move(v), {x}, [A, K, f, c](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        for (std::size_t fr = 0; fr < f; ++fr)
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    T a = A[i * K + j];
                    if (a == T(0)) continue;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        px.grad[(fr * K + j) * c + ch] += a * self.grad[(fr * K + i) * c + ch];
                }
    });
}

// Sliding-window unfold within each block of `block_len` rows, zero padded.
// [B*block_len x C] -> [B*out_len x k*C], out_len = (block_len + 2p - k)/s + 1.
template <typename T>
Tensor<T> im2col_blocked(const Tensor<T>& x, std::size_t block_len, std::size_t k, std::size_t s,
                         std::size_t p) {
    if (x.rank() != 2 || x.rows() % block_len != 0)
        throw ShapeError("im2col_blocked: rows not divisible by block length");
    if (block_len + 2 * p < k) throw ShapeError("im2col_blocked: kernel larger than padded block");
    std::size_t b = x.rows() / block_len, c = x.cols();
    std::size_t out_len = (block_len + 2 * p - k) / s + 1;
    std::vector<T> v(b * out_len * k * c, T(0));
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t o = 0; o < out_len; ++o)
            for (std::size_t u = 0; u < k; ++u) {
                long src = static_cast<long>(o * s + u) - static_cast<long>(p);
                if (src < 0 || src >= static_cast<long>(block_len)) continue;
                std::copy_n(x.data().begin() + (bi * block_len + src) * c, c,
                            v.begin() + ((bi * out_len + o) * k + u) * c);
            }
    return make_op<T>({b * out_len, k * c}, std::move(v), {x},
                      [b, block_len, c, out_len, k, s, p](TensorNode<T>& self) {
                          auto& px = *self.parents[0];
                          for (std::size_t bi = 0; bi < b; ++bi)
                              for (std::size_t o = 0; o < out_len; ++o)
                                  for (std::size_t u = 0; u < k; ++u) {
                                      long src = static_cast<long>(o * s + u) -
                                                 static_cast<long>(p);
                                      if (src < 0 || src >= static_cast<long>(block_len)) continue;
                                      for (std::size_t ch = 0; ch < c; ++ch)
                                          px.grad[(bi * block_len + src) * c + ch] +=
                                              self.grad[((bi * out_len + o) * k + u) * c + ch];
                                  }
                      });
}

}  // namespace seds
