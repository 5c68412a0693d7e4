#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chunkalign/errors.hpp"
#include "chunkalign/kernels.hpp"
#include "chunkalign/rng.hpp"

using namespace chunkalign;
using namespace chunkalign::num;

TEST_CASE("matmul identity and hand-computed products") {
    const Tensor2D b = Tensor2D::from_rows({{3, 4}, {5, 6}});
    const Tensor2D prod = matmul(Tensor2D::identity(2), b);
    for (size_t i = 0; i < b.size(); ++i) CHECK(prod.data[i] == b.data[i]);

    const Tensor2D row = Tensor2D::from_rows({{1, 2}});
    const Tensor2D col = Tensor2D::from_rows({{3}, {4}});
    const Tensor2D scalar = matmul(row, col);
    CHECK(scalar.rows == 1);
    CHECK(scalar.cols == 1);
    CHECK(scalar.at(0, 0) == 11.0);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Tensor2D a(2, 3);
    const Tensor2D b(4, 2);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("4x2") != std::string::npos);
    }
}

TEST_CASE("matmul gradient vs central differences on random shapes") {
    Rng rng(11);
    const Tensor2D b = Tensor2D::random_normal(4, 2, rng);
    const Tensor2D x0 = Tensor2D::random_normal(3, 4, rng);
    const auto f = [&](const Tensor2D& a) {
        const Tensor2D c = matmul(a, b);
        double v = 0.0;
        for (double d : c.data) v += 0.5 * d * d;
        Tensor2D da(a.rows, a.cols), db(b.rows, b.cols);
        matmul_backward(a, b, c, da, db);
        return ScalarGrad{v, da};
    };
    CHECK(grad_check(f, x0, 1e-5) < 1e-6);
}

TEST_CASE("matmul associativity on random conformable triples") {
    Rng rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const Tensor2D a = Tensor2D::random_normal(3 + trial, 4, rng);
        const Tensor2D b = Tensor2D::random_normal(4, 5, rng);
        const Tensor2D c = Tensor2D::random_normal(5, 2 + trial, rng);
        const Tensor2D left = matmul(matmul(a, b), c);
        const Tensor2D right = matmul(a, matmul(b, c));
        for (size_t i = 0; i < left.size(); ++i) {
            CHECK(left.data[i] == doctest::Approx(right.data[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("softmax_rows: symmetry, stabilization, simplex") {
    const Tensor2D zeros(1, 4);
    const Tensor2D uniform = softmax_rows(zeros);
    for (int j = 0; j < 4; ++j) CHECK(uniform.at(0, j) == doctest::Approx(0.25).epsilon(1e-15));

    const Tensor2D big = Tensor2D::from_rows({{1000.0, 1000.0}});
    const Tensor2D stable = softmax_rows(big);
    CHECK(stable.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::isfinite(stable.at(0, 1)));

    Rng rng(3);
    const Tensor2D x = Tensor2D::random_normal(4, 6, rng, 3.0);
    const Tensor2D y = softmax_rows(x);
    for (int i = 0; i < y.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < y.cols; ++j) {
            CHECK(y.at(i, j) >= 0.0);
            sum += y.at(i, j);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax_rows gradient") {
    Rng rng(5);
    const Tensor2D w = Tensor2D::random_normal(2, 5, rng);
    const auto f = [&](const Tensor2D& x) {
        const Tensor2D y = softmax_rows(x);
        double v = 0.0;
        for (size_t i = 0; i < y.size(); ++i) v += y.data[i] * w.data[i];
        return ScalarGrad{v, softmax_rows_backward(y, w)};
    };
    CHECK(grad_check(f, Tensor2D::random_normal(2, 5, rng), 1e-5) < 1e-6);
}

TEST_CASE("layer_norm fixtures") {
    const std::vector<double> gain = {1.0, 1.0};
    const std::vector<double> bias = {0.0, 0.0};

    const Tensor2D constant = Tensor2D::from_rows({{5.0, 5.0}});
    const Tensor2D zeroed = layer_norm(constant, gain, bias, 1e-5);
    CHECK(std::abs(zeroed.at(0, 0)) < 1e-9);
    CHECK(std::abs(zeroed.at(0, 1)) < 1e-9);

    const Tensor2D two_point = Tensor2D::from_rows({{1.0, 3.0}});
    const Tensor2D standardized = layer_norm(two_point, gain, bias, 1e-14);
    CHECK(standardized.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(standardized.at(0, 1) == doctest::Approx(1.0).epsilon(1e-6));

    const std::vector<double> short_gain = {1.0};
    CHECK_THROWS_AS(layer_norm(two_point, short_gain, bias, 1e-5), DimensionError);
}

TEST_CASE("layer_norm gradients for x, gain, bias") {
    Rng rng(9);
    const int rows = 4, cols = 8;
    const Tensor2D w = Tensor2D::random_normal(rows, cols, rng);
    const Tensor2D x0 = Tensor2D::random_normal(rows, cols, rng);
    Tensor2D gain0 = Tensor2D::random_normal(1, cols, rng, 0.3);
    for (auto& g : gain0.data) g += 1.0;
    const Tensor2D bias0 = Tensor2D::random_normal(1, cols, rng, 0.3);
    const double eps = 1e-5;

    auto make = [&](int which) {
        return [&, which](const Tensor2D& v) {
            const Tensor2D& x = which == 0 ? v : x0;
            const Tensor2D& gain = which == 1 ? v : gain0;
            const Tensor2D& bias = which == 2 ? v : bias0;
            const Tensor2D y = layer_norm(x, gain.row_span(0), bias.row_span(0), eps);
            double value = 0.0;
            for (size_t i = 0; i < y.size(); ++i) value += y.data[i] * w.data[i];
            Tensor2D dx(rows, cols), dgain(1, cols), dbias(1, cols);
            layer_norm_backward(x, gain.row_span(0), eps, w, dx, dgain.row_span(0),
                                dbias.row_span(0));
            return ScalarGrad{value, which == 0 ? dx : (which == 1 ? dgain : dbias)};
        };
    };
    CHECK(grad_check(make(0), x0, 1e-5) < 1e-6);
    CHECK(grad_check(make(1), gain0, 1e-5) < 1e-6);
    CHECK(grad_check(make(2), bias0, 1e-5) < 1e-6);
}

TEST_CASE("gelu fixtures and gradient") {
    const Tensor2D zero(1, 1);
    CHECK(gelu(zero).at(0, 0) == 0.0);

    Tensor2D ten(1, 1);
    ten.at(0, 0) = 10.0;
    CHECK(std::abs(gelu(ten).at(0, 0) - 10.0) < 1e-4);

    Rng rng(13);
    const Tensor2D w = Tensor2D::random_normal(2, 6, rng);
    const auto f = [&](const Tensor2D& x) {
        const Tensor2D y = gelu(x);
        double v = 0.0;
        for (size_t i = 0; i < y.size(); ++i) v += y.data[i] * w.data[i];
        return ScalarGrad{v, gelu_backward(x, w)};
    };
    CHECK(grad_check(f, Tensor2D::random_normal(2, 6, rng), 1e-5) < 1e-6);
}

TEST_CASE("gelu is monotone on the tested range") {
    // increasing branch only: the curve has its minimum near x = -0.75
    double prev = gelu(Tensor2D::from_rows({{-0.5}})).at(0, 0);
    for (double v = -0.4; v <= 6.0; v += 0.1) {
        const double cur = gelu(Tensor2D::from_rows({{v}})).at(0, 0);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }
}

TEST_CASE("l2_normalize_rows fixtures") {
    const Tensor2D triple = l2_normalize_rows(Tensor2D::from_rows({{3.0, 4.0}}));
    CHECK(triple.at(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(triple.at(0, 1) == doctest::Approx(0.8).epsilon(1e-14));

    const Tensor2D unit = Tensor2D::from_rows({{0.0, 1.0, 0.0}});
    const Tensor2D same = l2_normalize_rows(unit);
    for (size_t i = 0; i < unit.size(); ++i) CHECK(same.data[i] == unit.data[i]);

    Rng rng(17);
    const Tensor2D x = Tensor2D::random_normal(5, 8, rng);
    const Tensor2D y = l2_normalize_rows(x);
    for (int i = 0; i < y.rows; ++i) {
        double norm = 0.0;
        for (int j = 0; j < y.cols; ++j) norm += y.at(i, j) * y.at(i, j);
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
    }

    const Tensor2D twice = l2_normalize_rows(y);
    for (size_t i = 0; i < y.size(); ++i) {
        CHECK(std::abs(twice.data[i] - y.data[i]) < 1e-12);
    }
}

TEST_CASE("l2_normalize_rows zero row names the row index") {
    Tensor2D x(3, 2);
    x.at(0, 0) = 1.0;
    x.at(2, 1) = 1.0;
    CHECK_THROWS_WITH_AS(l2_normalize_rows(x), doctest::Contains("row 1"),
                         DegenerateInputError);
}

TEST_CASE("mean_rows fixtures") {
    const Tensor2D x = Tensor2D::from_rows({{1, 1}, {3, 3}});
    const std::vector<double> mid = mean_rows(x, 0, 2);
    CHECK(mid[0] == doctest::Approx(2.0).epsilon(0));
    CHECK(mid[1] == doctest::Approx(2.0).epsilon(0));

    const std::vector<double> single = mean_rows(x, 1, 2);
    CHECK(single[0] == 3.0);

    CHECK_THROWS_AS(mean_rows(x, 1, 1), DegenerateInputError);
    CHECK_THROWS_AS(mean_rows(x, 0, 3), DegenerateInputError);
}

TEST_CASE("mean_rows full slice equals independent column means") {
    Rng rng(19);
    const Tensor2D x = Tensor2D::random_normal(7, 5, rng);
    const std::vector<double> got = mean_rows(x, 0, x.rows);
    for (int j = 0; j < x.cols; ++j) {
        double acc = 0.0;
        for (int i = 0; i < x.rows; ++i) acc += x.at(i, j);
        CHECK(got[size_t(j)] == doctest::Approx(acc / x.rows).epsilon(1e-12));
    }
}

TEST_CASE("grad_check on linear and quadratic maps") {
    Rng rng(23);
    const Tensor2D x = Tensor2D::random_normal(3, 4, rng);

    const auto sum_fn = [](const Tensor2D& t) {
        double v = 0.0;
        for (double d : t.data) v += d;
        Tensor2D g(t.rows, t.cols);
        for (auto& gd : g.data) gd = 1.0;
        return ScalarGrad{v, g};
    };
    CHECK(grad_check(sum_fn, x, 1e-6) < 1e-10);

    const auto sq_fn = [](const Tensor2D& t) {
        double v = 0.0;
        for (double d : t.data) v += d * d;
        Tensor2D g = t;
        for (auto& gd : g.data) gd *= 2.0;
        return ScalarGrad{v, g};
    };
    CHECK(grad_check(sq_fn, x, 1e-6) < 1e-8);
}

TEST_CASE("grad_check flags non-finite values") {
    const auto bad = [](const Tensor2D& t) {
        Tensor2D g(t.rows, t.cols);
        return ScalarGrad{std::log(t.at(0, 0)), g};
    };
    Tensor2D x(1, 1);
    x.at(0, 0) = -1.0;  // log of a negative number
    CHECK_THROWS_AS(grad_check(bad, x, 1e-5), OracleFailureError);
}
