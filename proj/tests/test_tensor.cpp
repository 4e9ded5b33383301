#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "trirec/gradcheck_suite.hpp"
#include "trirec/tensor.hpp"

using namespace trirec::nn;

TEST_CASE("matmul matches hand-computed values") {
    Tensor a = constant({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = constant({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    REQUIRE(c->shape == Shape{2, 2});
    CHECK(c->value[0] == doctest::Approx(58));
    CHECK(c->value[1] == doctest::Approx(64));
    CHECK(c->value[2] == doctest::Approx(139));
    CHECK(c->value[3] == doctest::Approx(154));
    CHECK_THROWS((void)matmul(a, constant({2, 2}, {1, 2, 3, 4})));
}

TEST_CASE("softmax rows sum to one and order is preserved") {
    Tensor a = constant({2, 3}, {0.1, 2.0, -1.0, 5.0, 5.0, 5.0});
    Tensor s = softmax_rows(a);
    CHECK(s->value[0] + s->value[1] + s->value[2] == doctest::Approx(1.0));
    CHECK(s->value[1] > s->value[0]);
    CHECK(s->value[0] > s->value[2]);
    // Uniform row → uniform probabilities.
    CHECK(s->value[3] == doctest::Approx(1.0 / 3));
}

TEST_CASE("layer_norm_rows normalizes each row") {
    Tensor a = constant({2, 4}, {1, 2, 3, 4, -5, 0, 5, 10});
    Tensor y = layer_norm_rows(a);
    for (int r = 0; r < 2; ++r) {
        double mean = 0, var = 0;
        for (int c = 0; c < 4; ++c) mean += y->value[r * 4 + c] / 4;
        for (int c = 0; c < 4; ++c) var += std::pow(y->value[r * 4 + c] - mean, 2) / 4;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("cumsum_exclusive entry i sums entries before i") {
    Tensor a = constant({1, 4}, {1, 2, 3, 4});
    Tensor c = cumsum_exclusive(a, 1);
    CHECK(c->value[0] == 0);
    CHECK(c->value[1] == 1);
    CHECK(c->value[2] == 3);
    CHECK(c->value[3] == 6);
    Tensor b = constant({3, 2}, {1, 10, 2, 20, 3, 30});
    Tensor cb = cumsum_exclusive(b, 0);
    CHECK(cb->value[0] == 0);
    CHECK(cb->value[2] == 1);
    CHECK(cb->value[4] == 3);
    CHECK(cb->value[5] == 30);
}

TEST_CASE("shape ops behave as documented") {
    Tensor a = constant({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor t = transpose2d(a);
    CHECK(t->shape == Shape{3, 2});
    CHECK(t->value[1] == 4);
    Tensor s = slice_rows(a, 1, 2);
    CHECK(s->shape == Shape{1, 3});
    CHECK(s->value[0] == 4);
    Tensor cat = concat_rows({a, s});
    CHECK(cat->shape == Shape{3, 3});
    CHECK(cat->value[8] == 6);
    Tensor er = expand_rows(constant({1, 2}, {7, 9}), 3);
    CHECK(er->shape == Shape{3, 2});
    CHECK(er->value[4] == 7);
    Tensor ec = expand_cols(constant({2, 1}, {3, 5}), 2);
    CHECK(ec->value[1] == 3);
    CHECK(ec->value[2] == 5);
    std::vector<int64_t> idx{5, 4, 3, 2, 1, 0};
    Tensor g = gather(a, idx, Shape{2, 3});
    CHECK(g->value[0] == 6);
    CHECK(g->value[5] == 1);
}

TEST_CASE("gradient accumulates when a tensor is used twice") {
    Tensor x = constant({1}, {3.0});
    x->requires_grad = true;
    Tensor y = add(mul(x, x), x);  // x^2 + x, dy/dx = 2x + 1 = 7
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(7.0));
}

TEST_CASE("every registered op passes finite-difference gradcheck") {
    for (const GradCheckResult& r : run_op_gradchecks(0)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("end-to-end objective gradients pass gradcheck") {
    for (const GradCheckResult& r : run_end_to_end_gradchecks(0)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("trunc_normal is deterministic and clipped at two standard deviations") {
    Rng a(9), b(9);
    std::vector<Scalar> va = trunc_normal(a, 1000);
    std::vector<Scalar> vb = trunc_normal(b, 1000);
    CHECK(va == vb);
    for (Scalar v : va) CHECK(std::fabs(v) <= 0.04);
}

TEST_CASE("checkpoints round-trip bit-exactly and enforce names/shapes") {
    Rng rng(3);
    Tensor p1 = param("layer.w", {2, 3}, trunc_normal(rng, 6));
    Tensor p2 = param("layer.b", {1, 3}, trunc_normal(rng, 3));
    std::string path = (std::filesystem::temp_directory_path() / "trirec_ckpt_test.bin").string();
    save_checkpoint(path, {p1, p2});
    CHECK(checkpoint_exists(path));

    Tensor q1 = param("layer.w", {2, 3}, std::vector<Scalar>(6, 0.0));
    Tensor q2 = param("layer.b", {1, 3}, std::vector<Scalar>(3, 0.0));
    load_checkpoint(path, {q1, q2});
    CHECK(q1->value == p1->value);
    CHECK(q2->value == p2->value);

    // Loading a subset tolerates extra stored params.
    Tensor only = param("layer.b", {1, 3}, std::vector<Scalar>(3, 0.0));
    CHECK_NOTHROW(load_checkpoint(path, {only}));
    CHECK(only->value == p2->value);

    // Missing name and shape mismatch both throw.
    Tensor missing = param("layer.unknown", {1, 3}, std::vector<Scalar>(3, 0.0));
    CHECK_THROWS(load_checkpoint(path, {missing}));
    Tensor badshape = param("layer.w", {3, 2}, std::vector<Scalar>(6, 0.0));
    CHECK_THROWS(load_checkpoint(path, {badshape}));
    std::filesystem::remove(path);
}

TEST_CASE("backward requires a scalar and zero_grad clears") {
    Tensor x = constant({2, 2}, {1, 2, 3, 4});
    x->requires_grad = true;
    CHECK_THROWS((void)backward(mul_scalar(x, 2.0)));
    Tensor y = sum_all(x);
    backward(y);
    CHECK(x->grad.size() == 4);
    zero_grad({x});
    CHECK(x->grad.empty());
}
