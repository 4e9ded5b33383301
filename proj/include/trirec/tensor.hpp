#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace trirec::nn {

// All graph math runs in double precision; checkpoints record the dtype so
// float32 payloads can be added without a format change.
using Scalar = double;
using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using Tensor = std::shared_ptr<Node>;

struct Node {
    Shape shape;
    std::vector<Scalar> value;
    std::vector<Scalar> grad;  // allocated on demand, same size as value
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void(Node&)> backward_fn;  // scatters this->grad into parents
    std::string name;  // non-empty for named parameters

    int64_t n() const { return static_cast<int64_t>(value.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[i]; }
    void ensure_grad();
};

// --- construction ---------------------------------------------------------
Tensor constant(const Shape& shape, std::vector<Scalar> data);
Tensor constant_scalar(Scalar v);
Tensor zeros(const Shape& shape, bool requires_grad = false);
Tensor full(const Shape& shape, Scalar v, bool requires_grad = false);
Tensor param(const std::string& name, const Shape& shape, std::vector<Scalar> data);

// Generic op node: value computed by caller, backward supplied as lambda.
Tensor make_op(const Shape& shape, std::vector<Scalar> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn);

// --- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, Scalar s);
Tensor mul_scalar(const Tensor& a, Scalar s);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form

// --- shape ----------------------------------------------------------------
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose2d(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);  // 2D, along axis 0
Tensor slice_rows(const Tensor& a, int64_t begin, int64_t end);  // 2D
// Broadcast a (1 x d) row to (rows x d).
Tensor expand_rows(const Tensor& row, int64_t rows);
// Broadcast a (n x 1) column to (n x cols).
Tensor expand_cols(const Tensor& col, int64_t cols);

// Permutation/gather: out[i] = a[idx[i]] (by flat element index).
Tensor gather(const Tensor& a, std::vector<int64_t> idx, const Shape& out_shape);
// max(a, c) elementwise with a constant.
Tensor clamp_min(const Tensor& a, Scalar c);

// --- reductions -----------------------------------------------------------
Tensor sum_all(const Tensor& a);   // -> shape {1}
Tensor mean_all(const Tensor& a);  // -> shape {1}
Tensor max_all(const Tensor& a);   // -> shape {1}, subgradient to first argmax
Tensor sum_axis(const Tensor& a, int axis);
// Exclusive prefix sum along `axis` (entry i = sum of entries < i).
Tensor cumsum_exclusive(const Tensor& a, int axis);

// --- linear algebra / nn --------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // (n,k) x (k,m)
Tensor softmax_rows(const Tensor& a);             // last axis of 2D
Tensor layer_norm_rows(const Tensor& a, Scalar eps = 1e-5);
// Multi-head attention; q: (n,d), k/v: (m,d), d divisible by heads.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

// --- autodiff -------------------------------------------------------------
// Reverse pass from a scalar (shape {1}) output.
void backward(const Tensor& loss);
// Clears grads on the given tensors.
void zero_grad(const std::vector<Tensor>& params);

// Max relative error between analytic gradient of f at x and central finite
// differences with step h. f must return a scalar tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-4);

// --- init / io --------------------------------------------------------------
using Rng = std::mt19937_64;
// Truncated normal init (std 0.02, clipped at 2 std).
std::vector<Scalar> trunc_normal(Rng& rng, int64_t n, double std_dev = 0.02);

// Binary checkpoint: magic + version + parameter count, then per-parameter
// (name, shape, dtype, raw little-endian floats).
void save_checkpoint(const std::string& path, const std::vector<Tensor>& params);
// Loads values into matching names; throws on missing name or shape mismatch.
void load_checkpoint(const std::string& path, const std::vector<Tensor>& params);
bool checkpoint_exists(const std::string& path);

}  // namespace trirec::nn
