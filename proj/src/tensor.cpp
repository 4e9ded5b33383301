#include "trirec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace trirec::nn {

int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a->shape != b->shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
}

Tensor constant(const Shape& shape, std::vector<Scalar> data) {
    if (numel(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("constant: data length does not match shape " + shape_str(shape));
    auto t = std::make_shared<Node>();
    t->shape = shape;
    t->value = std::move(data);
    return t;
}

Tensor constant_scalar(Scalar v) { return constant({1}, {v}); }

Tensor zeros(const Shape& shape, bool requires_grad) {
    auto t = std::make_shared<Node>();
    t->shape = shape;
    t->value.assign(numel(shape), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

Tensor full(const Shape& shape, Scalar v, bool requires_grad) {
    auto t = zeros(shape, requires_grad);
    std::fill(t->value.begin(), t->value.end(), v);
    return t;
}

Tensor param(const std::string& name, const Shape& shape, std::vector<Scalar> data) {
    auto t = constant(shape, std::move(data));
    t->requires_grad = true;
    t->name = name;
    return t;
}

Tensor make_op(const Shape& shape, std::vector<Scalar> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
    auto t = constant(shape, std::move(value));
    for (const auto& p : parents)
        if (p->requires_grad) t->requires_grad = true;
    if (t->requires_grad) {
        t->parents = std::move(parents);
        t->backward_fn = std::move(backward_fn);
    }
    return t;
}

// --- elementwise ------------------------------------------------------------

template <class Fwd, class Bwd>
static Tensor binary_ew(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Bwd bwd) {
    check_same_shape(a, b, op);
    std::vector<Scalar> out(a->value.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a->value[i], b->value[i]);
    return make_op(a->shape, std::move(out), {a, b}, [a, b, bwd](Node& self) {
        for (size_t i = 0; i < self.value.size(); ++i) {
            Scalar da, db;
            bwd(a->value[i], b->value[i], self.value[i], self.grad[i], da, db);
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad[i] += da;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad[i] += db;
            }
        }
    });
}

template <class Fwd, class Bwd>
static Tensor unary_ew(const Tensor& a, Fwd fwd, Bwd bwd) {
    std::vector<Scalar> out(a->value.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a->value[i]);
    return make_op(a->shape, std::move(out), {a}, [a, bwd](Node& self) {
        a->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i)
            a->grad[i] += self.grad[i] * bwd(a->value[i], self.value[i]);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "add", [](Scalar x, Scalar y) { return x + y; },
                     [](Scalar, Scalar, Scalar, Scalar g, Scalar& da, Scalar& db) { da = g; db = g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "sub", [](Scalar x, Scalar y) { return x - y; },
                     [](Scalar, Scalar, Scalar, Scalar g, Scalar& da, Scalar& db) { da = g; db = -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "mul", [](Scalar x, Scalar y) { return x * y; },
                     [](Scalar x, Scalar y, Scalar, Scalar g, Scalar& da, Scalar& db) {
                         da = g * y;
                         db = g * x;
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "div", [](Scalar x, Scalar y) { return x / y; },
                     [](Scalar x, Scalar y, Scalar, Scalar g, Scalar& da, Scalar& db) {
                         da = g / y;
                         db = -g * x / (y * y);
                     });
}

Tensor add_scalar(const Tensor& a, Scalar s) {
    return unary_ew(a, [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, Scalar s) {
    return unary_ew(a, [s](Scalar x) { return x * s; }, [s](Scalar, Scalar) { return s; });
}

Tensor exp(const Tensor& a) {
    return unary_ew(a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_ew(a, [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_ew(a, [](Scalar x) { return std::sqrt(x); },
                    [](Scalar, Scalar y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
    return unary_ew(a, [](Scalar x) { return x * x; }, [](Scalar x, Scalar) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_ew(a, [](Scalar x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](Scalar, Scalar y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return unary_ew(a,
                    [](Scalar x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                    [](Scalar x, Scalar) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_ew(a,
                    [](Scalar x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
                    [](Scalar x, Scalar) {
                        double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                        return cdf + x * pdf;
                    });
}

// --- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (numel(shape) != a->n())
        throw std::invalid_argument("reshape: cannot reshape " + shape_str(a->shape) + " to " +
                                    shape_str(shape));
    return make_op(shape, a->value, {a}, [a](Node& self) {
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    });
}

Tensor transpose2d(const Tensor& a) {
    if (a->ndim() != 2) throw std::invalid_argument("transpose2d: needs 2D, got " + shape_str(a->shape));
    int64_t n = a->dim(0), m = a->dim(1);
    std::vector<Scalar> out(a->value.size());
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) out[j * n + i] = a->value[i * m + j];
    return make_op({m, n}, std::move(out), {a}, [a, n, m](Node& self) {
        a->ensure_grad();
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) a->grad[i * m + j] += self.grad[j * n + i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
    int64_t cols = parts[0]->dim(1), rows = 0;
    for (const auto& p : parts) {
        if (p->ndim() != 2 || p->dim(1) != cols)
            throw std::invalid_argument("concat_rows: column mismatch " + shape_str(p->shape));
        rows += p->dim(0);
    }
    std::vector<Scalar> out;
    out.reserve(rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p->value.begin(), p->value.end());
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_op({rows, cols}, std::move(out), parents, [parts](Node& self) {
        size_t off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += self.grad[off + i];
            }
            off += p->value.size();
        }
    });
}

Tensor slice_rows(const Tensor& a, int64_t begin, int64_t end) {
    if (a->ndim() != 2) throw std::invalid_argument("slice_rows: needs 2D");
    if (begin < 0 || end > a->dim(0) || begin > end)
        throw std::invalid_argument("slice_rows: range out of bounds");
    int64_t cols = a->dim(1);
    std::vector<Scalar> out(a->value.begin() + begin * cols, a->value.begin() + end * cols);
    return make_op({end - begin, cols}, std::move(out), {a}, [a, begin, cols](Node& self) {
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) a->grad[begin * cols + i] += self.grad[i];
    });
}

Tensor expand_rows(const Tensor& row, int64_t rows) {
    if (row->ndim() != 2 || row->dim(0) != 1)
        throw std::invalid_argument("expand_rows: needs (1,d), got " + shape_str(row->shape));
    int64_t d = row->dim(1);
    std::vector<Scalar> out(rows * d);
    for (int64_t r = 0; r < rows; ++r)
        std::copy(row->value.begin(), row->value.end(), out.begin() + r * d);
    return make_op({rows, d}, std::move(out), {row}, [row, rows, d](Node& self) {
        row->ensure_grad();
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < d; ++j) row->grad[j] += self.grad[r * d + j];
    });
}

Tensor expand_cols(const Tensor& col, int64_t cols) {
    if (col->ndim() != 2 || col->dim(1) != 1)
        throw std::invalid_argument("expand_cols: needs (n,1), got " + shape_str(col->shape));
    int64_t n = col->dim(0);
    std::vector<Scalar> out(n * cols);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < cols; ++j) out[i * cols + j] = col->value[i];
    return make_op({n, cols}, std::move(out), {col}, [col, n, cols](Node& self) {
        col->ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
            Scalar s = 0;
            for (int64_t j = 0; j < cols; ++j) s += self.grad[i * cols + j];
            col->grad[i] += s;
        }
    });
}

Tensor gather(const Tensor& a, std::vector<int64_t> idx, const Shape& out_shape) {
    if (numel(out_shape) != static_cast<int64_t>(idx.size()))
        throw std::invalid_argument("gather: index count does not match out shape");
    std::vector<Scalar> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= a->n()) throw std::invalid_argument("gather: index out of range");
        out[i] = a->value[idx[i]];
    }
    return make_op(out_shape, std::move(out), {a}, [a, idx = std::move(idx)](Node& self) {
        a->ensure_grad();
        for (size_t i = 0; i < idx.size(); ++i) a->grad[idx[i]] += self.grad[i];
    });
}

Tensor clamp_min(const Tensor& a, Scalar c) {
    return unary_ew(a, [c](Scalar x) { return std::max(x, c); },
                    [c](Scalar x, Scalar) { return x > c ? 1.0 : 0.0; });
}

// --- reductions ---------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    Scalar s = 0;
    for (Scalar v : a->value) s += v;
    return make_op({1}, {s}, {a}, [a](Node& self) {
        a->ensure_grad();
        for (auto& g : a->grad) g += self.grad[0];
    });
}

Tensor mean_all(const Tensor& a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a->n())); }

Tensor max_all(const Tensor& a) {
    size_t arg = 0;
    for (size_t i = 1; i < a->value.size(); ++i)
        if (a->value[i] > a->value[arg]) arg = i;
    return make_op({1}, {a->value[arg]}, {a}, [a, arg](Node& self) {
        a->ensure_grad();
        a->grad[arg] += self.grad[0];
    });
}

static void axis_split(const Shape& shape, int axis, int64_t& outer, int64_t& len, int64_t& inner) {
    outer = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    len = shape[axis];
    inner = 1;
    for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

Tensor sum_axis(const Tensor& a, int axis) {
    if (axis < 0 || axis >= a->ndim()) throw std::invalid_argument("sum_axis: axis out of range");
    int64_t outer, len, inner;
    axis_split(a->shape, axis, outer, len, inner);
    Shape out_shape = a->shape;
    out_shape.erase(out_shape.begin() + axis);
    if (out_shape.empty()) out_shape = {1};
    std::vector<Scalar> out(outer * inner, 0.0);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < len; ++l)
            for (int64_t i = 0; i < inner; ++i)
                out[o * inner + i] += a->value[(o * len + l) * inner + i];
    return make_op(out_shape, std::move(out), {a}, [a, outer, len, inner](Node& self) {
        a->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t l = 0; l < len; ++l)
                for (int64_t i = 0; i < inner; ++i)
                    a->grad[(o * len + l) * inner + i] += self.grad[o * inner + i];
    });
}

Tensor cumsum_exclusive(const Tensor& a, int axis) {
    if (axis < 0 || axis >= a->ndim()) throw std::invalid_argument("cumsum_exclusive: axis out of range");
    int64_t outer, len, inner;
    axis_split(a->shape, axis, outer, len, inner);
    std::vector<Scalar> out(a->value.size());
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            Scalar acc = 0;
            for (int64_t l = 0; l < len; ++l) {
                out[(o * len + l) * inner + i] = acc;
                acc += a->value[(o * len + l) * inner + i];
            }
        }
    return make_op(a->shape, std::move(out), {a}, [a, outer, len, inner](Node& self) {
        a->ensure_grad();
        // d out_j / d a_i = 1 for i < j  =>  grad_a_i = sum_{j>i} grad_out_j
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                Scalar acc = 0;
                for (int64_t l = len - 1; l >= 0; --l) {
                    a->grad[(o * len + l) * inner + i] += acc;
                    acc += self.grad[(o * len + l) * inner + i];
                }
            }
    });
}

// --- linear algebra / nn ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                                    shape_str(b->shape));
    int64_t n = a->dim(0), k = a->dim(1), m = b->dim(1);
    std::vector<Scalar> out(n * m, 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < k; ++l) {
            Scalar av = a->value[i * k + l];
            if (av == 0.0) continue;
            const Scalar* brow = &b->value[l * m];
            Scalar* orow = &out[i * m];
            for (int64_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    return make_op({n, m}, std::move(out), {a, b}, [a, b, n, k, m](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            // dA = dC * B^T
            for (int64_t i = 0; i < n; ++i)
                for (int64_t l = 0; l < k; ++l) {
                    Scalar s = 0;
                    const Scalar* grow = &self.grad[i * m];
                    const Scalar* brow = &b->value[l * m];
                    for (int64_t j = 0; j < m; ++j) s += grow[j] * brow[j];
                    a->grad[i * k + l] += s;
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            // dB = A^T * dC
            for (int64_t i = 0; i < n; ++i)
                for (int64_t l = 0; l < k; ++l) {
                    Scalar av = a->value[i * k + l];
                    if (av == 0.0) continue;
                    const Scalar* grow = &self.grad[i * m];
                    Scalar* brow = &b->grad[l * m];
                    for (int64_t j = 0; j < m; ++j) brow[j] += av * grow[j];
                }
        }
    });
}

Tensor softmax_rows(const Tensor& a) {
    if (a->ndim() != 2) throw std::invalid_argument("softmax_rows: needs 2D");
    int64_t n = a->dim(0), m = a->dim(1);
    std::vector<Scalar> out(a->value.size());
    for (int64_t i = 0; i < n; ++i) {
        const Scalar* row = &a->value[i * m];
        Scalar mx = row[0];
        for (int64_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        Scalar z = 0;
        for (int64_t j = 0; j < m; ++j) {
            out[i * m + j] = std::exp(row[j] - mx);
            z += out[i * m + j];
        }
        for (int64_t j = 0; j < m; ++j) out[i * m + j] /= z;
    }
    return make_op({n, m}, std::move(out), {a}, [a, n, m](Node& self) {
        a->ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
            const Scalar* y = &self.value[i * m];
            const Scalar* g = &self.grad[i * m];
            Scalar dot = 0;
            for (int64_t j = 0; j < m; ++j) dot += y[j] * g[j];
            for (int64_t j = 0; j < m; ++j) a->grad[i * m + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor layer_norm_rows(const Tensor& a, Scalar eps) {
    if (a->ndim() != 2) throw std::invalid_argument("layer_norm_rows: needs 2D");
    int64_t n = a->dim(0), m = a->dim(1);
    std::vector<Scalar> out(a->value.size());
    std::vector<Scalar> inv_std(n);
    for (int64_t i = 0; i < n; ++i) {
        const Scalar* row = &a->value[i * m];
        Scalar mu = 0;
        for (int64_t j = 0; j < m; ++j) mu += row[j];
        mu /= m;
        Scalar var = 0;
        for (int64_t j = 0; j < m; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= m;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int64_t j = 0; j < m; ++j) out[i * m + j] = (row[j] - mu) * inv_std[i];
    }
    return make_op({n, m}, std::move(out), {a},
                   [a, n, m, inv_std = std::move(inv_std)](Node& self) {
                       a->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                           const Scalar* y = &self.value[i * m];
                           const Scalar* g = &self.grad[i * m];
                           Scalar mean_g = 0, mean_gy = 0;
                           for (int64_t j = 0; j < m; ++j) {
                               mean_g += g[j];
                               mean_gy += g[j] * y[j];
                           }
                           mean_g /= m;
                           mean_gy /= m;
                           for (int64_t j = 0; j < m; ++j)
                               a->grad[i * m + j] += inv_std[i] * (g[j] - mean_g - y[j] * mean_gy);
                       }
                   });
}

static Tensor slice_cols(const Tensor& a, int64_t begin, int64_t end) {
    return transpose2d(slice_rows(transpose2d(a), begin, end));
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    if (q->ndim() != 2 || k->ndim() != 2 || v->ndim() != 2)
        throw std::invalid_argument("attention: needs 2D inputs");
    int64_t d = q->dim(1);
    if (k->dim(1) != d || v->dim(1) != d || k->dim(0) != v->dim(0))
        throw std::invalid_argument("attention: shape mismatch q" + shape_str(q->shape) + " k" +
                                    shape_str(k->shape) + " v" + shape_str(v->shape));
    if (heads <= 0 || d % heads != 0)
        throw std::invalid_argument("attention: heads must divide width");
    int64_t dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor att = softmax_rows(mul_scalar(matmul(qh, transpose2d(kh)), scale));
        outs.push_back(transpose2d(matmul(att, vh)));
    }
    return transpose2d(concat_rows(outs));
}

// --- autodiff -----------------------------------------------------------------

static void topo_order(const Tensor& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

void backward(const Tensor& loss) {
    if (loss->n() != 1) throw std::invalid_argument("backward: output must be scalar");
    if (!loss->requires_grad) return;
    std::vector<Node*> order;
    topo_order(loss, order);
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

void zero_grad(const std::vector<Tensor>& params) {
    for (const auto& p : params) p->grad.clear();
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    x->requires_grad = true;
    x->grad.clear();
    Tensor y = f(x);
    if (y->n() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
    backward(y);
    std::vector<Scalar> analytic = x->grad.empty() ? std::vector<Scalar>(x->n(), 0.0) : x->grad;
    double max_err = 0;
    auto eval_at = [&](int64_t i, Scalar v) {
        Scalar orig = x->value[i];
        x->value[i] = v;
        Scalar out = f(x)->value[0];
        x->value[i] = orig;
        return out;
    };
    for (int64_t i = 0; i < x->n(); ++i) {
        Scalar orig = x->value[i];
        // Fourth-order central difference: truncation O(h^4), so stiff terms
        // in the objective do not masquerade as gradient errors.
        Scalar fp1 = eval_at(i, orig + h);
        Scalar fm1 = eval_at(i, orig - h);
        Scalar fp2 = eval_at(i, orig + 2 * h);
        Scalar fm2 = eval_at(i, orig - 2 * h);
        Scalar central = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
        double err = std::fabs(analytic[i] - central) / (std::fabs(central) + 1e-8);
        max_err = std::max(max_err, err);
    }
    x->grad.clear();
    return max_err;
}

// --- init / io ------------------------------------------------------------------

std::vector<Scalar> trunc_normal(Rng& rng, int64_t n, double std_dev) {
    std::normal_distribution<double> dist(0.0, std_dev);
    std::vector<Scalar> out(n);
    for (auto& v : out) {
        double x;
        do {
            x = dist(rng);
        } while (std::fabs(x) > 2.0 * std_dev);
        v = x;
    }
    return out;
}

static constexpr char kMagic[8] = {'T', 'R', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
static void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
static void read_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void save_checkpoint(const std::string& path, const std::vector<Tensor>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    f.write(kMagic, 8);
    write_raw<uint32_t>(f, 1);  // version
    write_raw<uint64_t>(f, params.size());
    for (const auto& p : params) {
        if (p->name.empty()) throw std::runtime_error("save_checkpoint: unnamed parameter");
        write_raw<uint32_t>(f, static_cast<uint32_t>(p->name.size()));
        f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_raw<uint32_t>(f, static_cast<uint32_t>(p->shape.size()));
        for (int64_t d : p->shape) write_raw<uint64_t>(f, static_cast<uint64_t>(d));
        write_raw<uint8_t>(f, 8);  // dtype: f64
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(Scalar)));
    }
    if (!f) throw std::runtime_error("checkpoint write failed " + path);
}

void load_checkpoint(const std::string& path, const std::vector<Tensor>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic in " + path);
    uint32_t version = 0;
    read_raw(f, version);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    uint64_t count = 0;
    read_raw(f, count);
    std::unordered_map<std::string, Tensor> by_name;
    for (const auto& p : params) by_name[p->name] = p;
    size_t loaded = 0;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = 0;
        read_raw(f, name_len);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t ndim = 0;
        read_raw(f, ndim);
        Shape shape(ndim);
        for (auto& d : shape) {
            uint64_t v = 0;
            read_raw(f, v);
            d = static_cast<int64_t>(v);
        }
        uint8_t dtype = 0;
        read_raw(f, dtype);
        if (dtype != 8) throw std::runtime_error("unsupported checkpoint dtype");
        std::vector<Scalar> data(numel(shape));
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(Scalar)));
        auto it = by_name.find(name);
        if (it == by_name.end()) continue;  // tolerate extras
        if (it->second->shape != shape)
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        it->second->value = std::move(data);
        ++loaded;
    }
    if (!f) throw std::runtime_error("checkpoint truncated: " + path);
    if (loaded != params.size()) throw std::runtime_error("checkpoint missing parameters");
}

bool checkpoint_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace trirec::nn
