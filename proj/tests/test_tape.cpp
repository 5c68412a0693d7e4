#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chunkalign/gradcheck_suite.hpp"
#include "chunkalign/kernels.hpp"
#include "chunkalign/rng.hpp"
#include "chunkalign/tape.hpp"

using namespace chunkalign;
using namespace chunkalign::num;

namespace {

double weighted(const Tensor2D& x, const Tensor2D& w) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x.data[i] * w.data[i];
    return acc;
}

// Scalarizes any tape output by a frozen weight matrix so grad_check can
// drive compositions of tape ops.
ScalarGradFn scalarized(const std::function<VarId(Tape&, VarId)>& build, const Tensor2D& w) {
    return [build, w](const Tensor2D& x) {
        Tape tape;
        const VarId leaf = tape.leaf(x);
        const VarId out = build(tape, leaf);
        const Tensor2D& v = tape.value(out);
        REQUIRE(v.same_shape(w));
        // dot with w via a custom unary: grad is w itself
        const VarId loss = tape.custom_unary(
            out, Tensor2D(1, 1, {weighted(v, w)}), [w](const Tensor2D& d_out) {
                Tensor2D g = w;
                for (auto& gd : g.data) gd *= d_out.at(0, 0);
                return g;
            });
        tape.backward(loss);
        return ScalarGrad{tape.value(loss).at(0, 0), tape.grad(leaf)};
    };
}

}  // namespace

TEST_CASE("tape matmul matches kernel and backpropagates both inputs") {
    Rng rng(31);
    const Tensor2D a = Tensor2D::random_normal(3, 4, rng);
    const Tensor2D b = Tensor2D::random_normal(4, 2, rng);
    Tape tape;
    const VarId va = tape.leaf(a);
    const VarId vb = tape.leaf(b);
    const VarId vc = tape.matmul(va, vb);
    const Tensor2D expect = matmul(a, b);
    for (size_t i = 0; i < expect.size(); ++i) {
        CHECK(tape.value(vc).data[i] == expect.data[i]);
    }

    const Tensor2D w = Tensor2D::random_normal(3, 2, rng);
    const auto f_a = scalarized([&](Tape& t, VarId leaf) {
        return t.matmul(leaf, t.constant(b));
    }, w);
    CHECK(grad_check(f_a, a, 1e-5) < 1e-6);

    const auto f_b = scalarized([&](Tape& t, VarId leaf) {
        return t.matmul(t.constant(a), leaf);
    }, w);
    CHECK(grad_check(f_b, b, 1e-5) < 1e-6);
}

TEST_CASE("tape composite ops pass finite-difference checks") {
    Rng rng(37);

    SUBCASE("matmul_nt") {
        const Tensor2D b = Tensor2D::random_normal(5, 4, rng);
        const Tensor2D w = Tensor2D::random_normal(3, 5, rng);
        const auto f = scalarized([&](Tape& t, VarId leaf) {
            return t.matmul_nt(leaf, t.constant(b));
        }, w);
        CHECK(grad_check(f, Tensor2D::random_normal(3, 4, rng), 1e-5) < 1e-6);
    }

    SUBCASE("add + scale + slice_cols") {
        const Tensor2D other = Tensor2D::random_normal(3, 6, rng);
        const Tensor2D w = Tensor2D::random_normal(3, 2, rng);
        const auto f = scalarized([&](Tape& t, VarId leaf) {
            const VarId sum = t.add(leaf, t.constant(other));
            return t.slice_cols(t.scale(sum, 1.7), 2, 4);
        }, w);
        CHECK(grad_check(f, Tensor2D::random_normal(3, 6, rng), 1e-5) < 1e-6);
    }

    SUBCASE("concat_cols of slices reassembles identity") {
        const Tensor2D x = Tensor2D::random_normal(4, 6, rng);
        Tape tape;
        const VarId leaf = tape.leaf(x);
        std::vector<VarId> parts;
        for (int c = 0; c < 6; c += 2) parts.push_back(tape.slice_cols(leaf, c, c + 2));
        const VarId whole = tape.concat_cols(parts);
        for (size_t i = 0; i < x.size(); ++i) CHECK(tape.value(whole).data[i] == x.data[i]);
    }

    SUBCASE("concat_rows + mean_over_rows + softmax masked") {
        auto mask = std::make_shared<const std::vector<uint8_t>>(
            std::vector<uint8_t>{1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 1, 1});
        const Tensor2D w = Tensor2D::random_normal(1, 4, rng);
        const auto f = scalarized([&](Tape& t, VarId leaf) {
            const VarId soft = t.softmax_rows(leaf, mask);
            return t.mean_over_rows(soft, {0, 2});
        }, w);
        CHECK(grad_check(f, Tensor2D::random_normal(3, 4, rng), 1e-5) < 1e-6);
    }

    SUBCASE("gather_rows accumulates repeated ids") {
        const Tensor2D w = Tensor2D::random_normal(4, 3, rng);
        const auto f = scalarized([&](Tape& t, VarId leaf) {
            return t.gather_rows(leaf, {1, 0, 1, 2});
        }, w);
        CHECK(grad_check(f, Tensor2D::random_normal(3, 3, rng), 1e-5) < 1e-6);
    }

    SUBCASE("gelu + layer_norm + l2_normalize chain") {
        Tensor2D gain(1, 5), bias(1, 5);
        for (auto& g : gain.data) g = 1.1;
        bias.at(0, 2) = 0.3;
        const Tensor2D w = Tensor2D::random_normal(2, 5, rng);
        const auto f = scalarized([&](Tape& t, VarId leaf) {
            const VarId ln = t.layer_norm(leaf, t.leaf(gain), t.leaf(bias), 1e-5);
            return t.l2_normalize_rows(t.gelu(ln));
        }, w);
        CHECK(grad_check(f, Tensor2D::random_normal(2, 5, rng), 1e-5) < 1e-6);
    }
}

TEST_CASE("backward accumulates through shared subexpressions") {
    // y = x + x should give gradient 2 everywhere.
    Tape tape;
    const Tensor2D x = Tensor2D::from_rows({{1.0, 2.0}});
    const VarId leaf = tape.leaf(x);
    const VarId doubled = tape.add(leaf, leaf);
    const VarId loss = tape.mean_over_rows(doubled, {0});
    // loss = mean of single row = (x0+x0 + ... ) picks column mean; scalarize:
    const VarId total = tape.custom_unary(loss, Tensor2D(1, 1, {tape.value(loss).at(0, 0) +
                                                                tape.value(loss).at(0, 1)}),
                                          [](const Tensor2D& d) {
                                              Tensor2D g(1, 2);
                                              g.at(0, 0) = d.at(0, 0);
                                              g.at(0, 1) = d.at(0, 0);
                                              return g;
                                          });
    tape.backward(total);
    CHECK(tape.grad(leaf).at(0, 0) == doctest::Approx(2.0));
    CHECK(tape.grad(leaf).at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("full gradcheck suite is green and the corrupt hook trips it") {
    const auto results = run_gradcheck_suite(20240601, false);
    CHECK(results.size() > 30);
    for (const auto& r : results) {
        INFO(r.name, " err=", r.max_rel_err);
        CHECK(r.pass);
    }

    const auto corrupted = run_gradcheck_suite(20240601, true);
    bool any_fail = false;
    for (const auto& r : corrupted) any_fail |= !r.pass;
    CHECK(any_fail);
}
