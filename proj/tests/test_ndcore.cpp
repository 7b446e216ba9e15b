#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "peasi/errors.hpp"
#include "peasi/tape.hpp"

using namespace peasi;
using nd::Parameter;
using nd::Tape;
using nd::Tensor;
using testing::max_fd_rel_error;
using testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

// u * Out * v^T reduces any op output to a scalar with non-uniform output
// gradients, so the backward pass is exercised entry by entry.
Tape::Id reduce_to_scalar(Tape& tape, Tape::Id out, const Tensor& u, const Tensor& v) {
    const auto uv = tape.matmul(tape.input(u), out);  // 1 x cols
    return tape.matmul_nt(uv, tape.input(v));         // 1 x 1
}

}  // namespace

TEST_CASE("softmax hand values") {
    Tape tape;
    const auto in = tape.input(Tensor::row_vector({0.0, 0.0}));
    const auto out = tape.softmax_rows(in);
    CHECK(tape.value(out)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.value(out)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<std::uint8_t> keep{1, 1, 0};
    const auto masked_in = tape.input(Tensor::row_vector({1.0, 1.0, 1.0}));
    const auto masked = tape.softmax_rows(masked_in, &keep);
    CHECK(tape.value(masked)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.value(masked)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.value(masked)(0, 2) == 0.0);
}

TEST_CASE("softmax sums to one over the unmasked support") {
    Rng rng(11);
    for (int iter = 0; iter < 500; ++iter) {
        const int n = rng.uniform_int(1, 9);
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(n), 0);
        int kept = 0;
        for (auto& k : keep)
            if (rng.uniform() < 0.6) {
                k = 1;
                ++kept;
            }
        if (kept == 0) keep[rng.below(keep.size())] = 1;
        Tape tape(false);
        const auto in = tape.input(random_tensor(1, n, rng, 3.0));
        const auto out = tape.softmax_rows(in, &keep);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (!keep[static_cast<std::size_t>(j)])
                CHECK(tape.value(out)(0, j) == 0.0);
            sum += tape.value(out)(0, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("cross entropy hand value: one-hot target 0, logits [ln 3, 0, 0]") {
    Tape tape;
    const auto logits = tape.input(Tensor::row_vector({std::log(3.0), 0.0, 0.0}));
    const auto loss = tape.cross_entropy(logits, 0, 3);
    // softmax = [3,1,1]/5, so -log(0.6).
    CHECK(tape.scalar_value(loss) == doctest::Approx(-std::log(0.6)).epsilon(1e-12));
}

TEST_CASE("layer_norm normalizes each row before the affine") {
    Rng rng(12);
    Tape tape;
    Parameter gain("g", [] {
        Tensor t(1, 16);
        t.fill(1.0);
        return t;
    }());
    Parameter bias("b", Tensor(1, 16));
    const auto x = tape.input(random_tensor(5, 16, rng, 2.0));
    const auto out = tape.layer_norm(x, tape.param(gain), tape.param(bias));
    for (int i = 0; i < 5; ++i) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mean += tape.value(out)(i, j);
        mean /= 16;
        for (int j = 0; j < 16; ++j) {
            const double d = tape.value(out)(i, j) - mean;
            var += d * d;
        }
        var /= 16;
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(var - 1.0) <= 1e-6);
    }
}

TEST_CASE("shape mismatches carry both shapes in the message") {
    Tape tape;
    const auto a = tape.input(Tensor(2, 3));
    const auto b = tape.input(Tensor(2, 3));
    try {
        (void)tape.matmul(a, b);
        FAIL("expected ShapeMismatch");
    } catch (const ShapeMismatch& e) {
        const std::string what = e.what();
        CHECK(what.find("[2x3]") != std::string::npos);
    }
}

TEST_CASE("gradient check: every core op matches central differences") {
    Rng rng(13);

    SUBCASE("matmul") {
        Parameter a("a", random_tensor(3, 4, rng));
        Parameter b("b", random_tensor(4, 5, rng));
        const Tensor u = random_tensor(1, 3, rng);
        const Tensor v = random_tensor(1, 5, rng);
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(reduce_to_scalar(t, t.matmul(t.param(a), t.param(b)), u, v));
        };
        Tape t;
        t.backward(reduce_to_scalar(t, t.matmul(t.param(a), t.param(b)), u, v));
        CHECK(max_fd_rel_error({&a, &b}, loss, rng) < kGradTol);
    }

    SUBCASE("matmul_nt") {
        Parameter a("a", random_tensor(3, 4, rng));
        Parameter b("b", random_tensor(5, 4, rng));
        const Tensor u = random_tensor(1, 3, rng);
        const Tensor v = random_tensor(1, 5, rng);
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(reduce_to_scalar(t, t.matmul_nt(t.param(a), t.param(b)), u, v));
        };
        Tape t;
        t.backward(reduce_to_scalar(t, t.matmul_nt(t.param(a), t.param(b)), u, v));
        CHECK(max_fd_rel_error({&a, &b}, loss, rng) < kGradTol);
    }

    SUBCASE("add, add_rowvec, scale, concat, slice, row") {
        Parameter a("a", random_tensor(3, 6, rng));
        Parameter b("b", random_tensor(3, 6, rng));
        Parameter r("r", random_tensor(1, 6, rng));
        const Tensor u = random_tensor(1, 3, rng);
        const Tensor v = random_tensor(1, 4, rng);
        const auto build = [&](Tape& t) {
            const auto sum = t.add(t.param(a), t.param(b));
            const auto biased = t.add_rowvec(sum, t.param(r));
            const auto scaled = t.scale(biased, 0.7);
            const auto cat = t.concat_cols(t.slice_cols(scaled, 1, 2), t.slice_cols(scaled, 3, 2));
            return reduce_to_scalar(t, cat, u, v);
        };
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(build(t));
        };
        Tape t;
        t.backward(build(t));
        CHECK(max_fd_rel_error({&a, &b, &r}, loss, rng) < kGradTol);
    }

    SUBCASE("tanh and gelu") {
        Parameter a("a", random_tensor(2, 5, rng));
        const Tensor u = random_tensor(1, 2, rng);
        const Tensor v = random_tensor(1, 5, rng);
        const auto build = [&](Tape& t) {
            return reduce_to_scalar(t, t.gelu(t.tanh_of(t.param(a))), u, v);
        };
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(build(t));
        };
        Tape t;
        t.backward(build(t));
        CHECK(max_fd_rel_error({&a}, loss, rng) < kGradTol);
    }

    SUBCASE("layer_norm") {
        Parameter x("x", random_tensor(4, 8, rng));
        Parameter gain("g", random_tensor(1, 8, rng));
        Parameter bias("b", random_tensor(1, 8, rng));
        const Tensor u = random_tensor(1, 4, rng);
        const Tensor v = random_tensor(1, 8, rng);
        const auto build = [&](Tape& t) {
            return reduce_to_scalar(t, t.layer_norm(t.param(x), t.param(gain), t.param(bias)), u, v);
        };
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(build(t));
        };
        Tape t;
        t.backward(build(t));
        CHECK(max_fd_rel_error({&x, &gain, &bias}, loss, rng) < kGradTol);
    }

    SUBCASE("masked softmax") {
        Parameter x("x", random_tensor(3, 6, rng));
        std::vector<std::uint8_t> keep{1, 0, 1, 1, 0, 1};
        const Tensor u = random_tensor(1, 3, rng);
        const Tensor v = random_tensor(1, 6, rng);
        const auto build = [&](Tape& t) {
            return reduce_to_scalar(t, t.softmax_rows(t.param(x), &keep), u, v);
        };
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(build(t));
        };
        Tape t;
        t.backward(build(t));
        CHECK(max_fd_rel_error({&x}, loss, rng) < kGradTol);
    }

    SUBCASE("embedding_rows") {
        Parameter table("emb", random_tensor(7, 4, rng));
        const std::vector<int> ids{0, 3, 3, 6, 1};
        const Tensor u = random_tensor(1, 5, rng);
        const Tensor v = random_tensor(1, 4, rng);
        const auto build = [&](Tape& t) {
            return reduce_to_scalar(t, t.embedding_rows(t.param(table), ids), u, v);
        };
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(build(t));
        };
        Tape t;
        t.backward(build(t));
        CHECK(max_fd_rel_error({&table}, loss, rng) < kGradTol);
    }

    SUBCASE("cross_entropy with support mask") {
        Parameter logits("z", random_tensor(1, 5, rng));
        const auto loss = [&] {
            Tape t;
            return t.scalar_value(t.cross_entropy(t.param(logits), 1, 3));
        };
        Tape t;
        t.backward(t.cross_entropy(t.param(logits), 1, 3));
        CHECK(max_fd_rel_error({&logits}, loss, rng) < kGradTol);
        // Slots beyond the support must get zero gradient.
        CHECK(logits.grad[3] == 0.0);
        CHECK(logits.grad[4] == 0.0);
    }
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
    Parameter p("p", Tensor::row_vector({1.5, -2.0}));
    const Tensor before = p.value;
    Parameter* ps[] = {&p};
    nd::adam_step(ps, {.lr = 0.1});
    CHECK(p.value == before);
    CHECK(p.step == 1);
}

TEST_CASE("adam: single unit-gradient step moves by about -lr") {
    Parameter p("p", Tensor::row_vector({0.0}));
    p.grad[0] = 1.0;
    Parameter* ps[] = {&p};
    nd::adam_step(ps, {.lr = 0.1});
    // Bias-corrected m_hat / sqrt(v_hat) = 1 on the first step.
    CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p.grad[0] == 0.0);  // gradients zeroed afterward
}

TEST_CASE("adam: descends a convex quadratic") {
    Parameter p("p", Tensor::row_vector({0.0}));
    Parameter* ps[] = {&p};
    const auto loss_value = [&] { return (p.value[0] - 3.0) * (p.value[0] - 3.0); };
    const double initial = loss_value();
    for (int i = 0; i < 2; ++i) {
        p.grad[0] = 2.0 * (p.value[0] - 3.0);
        nd::adam_step(ps, {.lr = 0.05});
    }
    CHECK(loss_value() < initial);
}

TEST_CASE("parameter step count increases monotonically") {
    Parameter p("p", Tensor::row_vector({0.0}));
    Parameter* ps[] = {&p};
    for (int i = 1; i <= 5; ++i) {
        nd::adam_step(ps, {});
        CHECK(p.step == i);
    }
}
