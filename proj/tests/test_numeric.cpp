#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mrn/ops.hpp"
#include "mrn/sgd.hpp"

using namespace mrn;
using namespace mrn::num;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
    std::vector<double> v(shape_volume(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Central finite differences against analytic gradients. Relative error
/// uses max(|analytic|, |numeric|, 1) in the denominator, the usual
/// gradcheck convention so near-zero gradients compare at absolute scale.
double max_grad_error(const std::function<Tensor(Tape*)>& forward, std::vector<Tensor> params,
                      double eps = 1e-5) {
    Tape tape;
    Tensor loss = forward(&tape);
    tape.backward(loss);
    double worst = 0.0;
    for (Tensor& p : params) {
        std::vector<double> analytic = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) {
            double keep = p.data()[i];
            p.data()[i] = keep + eps;
            double up = forward(nullptr).item();
            p.data()[i] = keep - eps;
            double down = forward(nullptr).item();
            p.data()[i] = keep;
            double numeric = (up - down) / (2 * eps);
            double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1.0});
            worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("matmul computes the textbook example") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor c = matmul(nullptr, a, b);
    REQUIRE(c.shape() == Shape{2, 1});
    CHECK(c.data()[0] == doctest::Approx(3));
    CHECK(c.data()[1] == doctest::Approx(7));
    CHECK_THROWS_AS(matmul(nullptr, a, Tensor({3, 1}, {1, 1, 1})), ShapeMismatch);
}

TEST_CASE("softmax matches hand values and normalizes exactly") {
    Tensor flat = softmax(nullptr, Tensor({2}, {0, 0}));
    CHECK(flat.data()[0] == doctest::Approx(0.5));
    CHECK(flat.data()[1] == doctest::Approx(0.5));

    Tensor skew = softmax(nullptr, Tensor({2}, {std::log(2.0), 0}));
    CHECK(skew.data()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(skew.data()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Rng rng(7);
    Tensor m = random_tensor({5, 9}, rng, -30, 30, false);
    Tensor sm = softmax(nullptr, m, 1);
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 9; ++c) {
            double v = sm.data()[r * 9 + c];
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward of x*x at x=3 is 6") {
    Tensor x({1}, {3.0}, true);
    Tape tape;
    Tensor y = mul(&tape, x, x);
    tape.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("parameters outside the computation get zero gradients") {
    Tensor x({1}, {3.0}, true);
    Tensor w({2, 2}, {1, 2, 3, 4}, true);
    Tape tape;
    Tensor y = mul(&tape, x, x);
    tape.backward(y);
    for (double g : w.grad()) CHECK(g == 0.0);
}

TEST_CASE("a tape refuses a second backward pass") {
    Tensor x({1}, {2.0}, true);
    Tape tape;
    Tensor y = mul(&tape, x, x);
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), DoubleBackward);
}

TEST_CASE("sgd follows the momentum update rule") {
    SUBCASE("momentum-free step") {
        std::vector<Tensor> params{Tensor({1}, {1.0}, true)};
        params[0].grad()[0] = 1.0;
        OptimizerState st;
        st.learning_rate = 0.1;
        st.momentum = 0.0;
        st.reset(params);
        sgd_step(params, st);
        CHECK(params[0].data()[0] == doctest::Approx(0.9));
    }
    SUBCASE("zero gradient and zero velocity leave parameters unchanged") {
        std::vector<Tensor> params{Tensor({1}, {5.0}, true)};
        OptimizerState st;
        st.reset(params);
        sgd_step(params, st);
        CHECK(params[0].data()[0] == doctest::Approx(5.0));
    }
    SUBCASE("two accumulating steps") {
        std::vector<Tensor> params{Tensor({1}, {0.0}, true)};
        OptimizerState st;
        st.learning_rate = 1.0;
        st.momentum = 0.5;
        st.reset(params);
        params[0].grad()[0] = 1.0;
        sgd_step(params, st);
        CHECK(st.velocity[0][0] == doctest::Approx(1.0));
        CHECK(params[0].data()[0] == doctest::Approx(-1.0));
        sgd_step(params, st);  // gradient still 1
        CHECK(st.velocity[0][0] == doctest::Approx(1.5));
        CHECK(params[0].data()[0] == doctest::Approx(-2.5));
    }
}

TEST_CASE("every primitive passes the finite-difference check") {
    Rng rng(42);
    const double tol = 1e-4;

    SUBCASE("matmul") {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 2}, rng);
        Tensor probe = random_tensor({3, 2}, rng, -1, 1, false);
        auto f = [&](Tape* t) { return reduce_mean(t, mul(t, matmul(t, a, b), probe)); };
        CHECK(max_grad_error(f, {a, b}) < tol);
    }
    SUBCASE("elementwise add sub mul div") {
        Tensor a = random_tensor({2, 3}, rng);
        Tensor b = random_tensor({2, 3}, rng, 0.5, 2.0);  // away from zero for div
        auto f = [&](Tape* t) {
            Tensor s = add(t, a, b);
            s = sub(t, s, mul(t, a, b));
            s = div(t, s, b);
            return reduce_mean(t, s);
        };
        CHECK(max_grad_error(f, {a, b}) < tol);
    }
    SUBCASE("scalar broadcast") {
        Tensor a = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({1}, rng, 0.5, 1.5);
        auto f = [&](Tape* t) { return reduce_mean(t, div(t, add(t, a, c), c)); };
        CHECK(max_grad_error(f, {a, c}) < tol);
    }
    SUBCASE("exp log sigmoid") {
        Tensor a = random_tensor({2, 3}, rng, 0.2, 1.5);
        auto f = [&](Tape* t) {
            return reduce_mean(t, sigmoid(t, log(t, exp(t, a))));
        };
        CHECK(max_grad_error(f, {a}) < tol);
    }
    SUBCASE("relu and leaky_relu away from the kink") {
        Tensor a({2, 2}, {0.4, -0.7, 1.3, -0.2}, true);
        auto f = [&](Tape* t) {
            return reduce_mean(t, add(t, relu(t, a), leaky_relu(t, a, 0.2)));
        };
        CHECK(max_grad_error(f, {a}) < tol);
    }
    SUBCASE("softmax both axes") {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor probe = random_tensor({3, 4}, rng, -1, 1, false);
        auto f = [&](Tape* t) {
            Tensor s = add(t, softmax(t, a, 1), softmax(t, a, 0));
            return reduce_mean(t, mul(t, s, probe));
        };
        CHECK(max_grad_error(f, {a}) < tol);
    }
    SUBCASE("concat slice reshape transpose") {
        Tensor a = random_tensor({2, 3}, rng);
        Tensor b = random_tensor({2, 2}, rng);
        auto f = [&](Tape* t) {
            Tensor cat = concat(t, {a, b}, 1);             // 2x5
            Tensor sl = slice(t, cat, 1, 1, 3);            // 2x3
            Tensor tr = transpose(t, sl);                  // 3x2
            return reduce_mean(t, reshape(t, tr, {6}));
        };
        CHECK(max_grad_error(f, {a, b}) < tol);
    }
    SUBCASE("reductions") {
        Tensor a = random_tensor({3, 4}, rng);
        auto f = [&](Tape* t) {
            Tensor s0 = reduce_sum(t, a, 0);     // {4}
            Tensor m1 = reduce_mean(t, a, 1);    // {3}
            Tensor mx = reduce_max(t, a, 1);     // {3}
            Tensor joined = concat(t, {reshape(t, s0, {4, 1}), Tensor::zeros({4, 1})}, 1);
            return add(t, reduce_mean(t, joined),
                       add(t, reduce_mean(t, reshape(t, m1, {3, 1})),
                           reduce_mean(t, reshape(t, mx, {3, 1}))));
        };
        CHECK(max_grad_error(f, {a}) < tol);
    }
    SUBCASE("embedding gather") {
        Tensor table = random_tensor({5, 3}, rng);
        std::vector<int> ids{0, 3, 3, 1};
        Tensor probe = random_tensor({4, 3}, rng, -1, 1, false);
        auto f = [&](Tape* t) {
            return reduce_mean(t, mul(t, embedding_gather(t, table, ids), probe));
        };
        CHECK(max_grad_error(f, {table}) < tol);
    }
    SUBCASE("dropout with a fixed mask") {
        Tensor a = random_tensor({4, 4}, rng);
        auto f = [&](Tape* t) {
            Rng drop(99);  // fresh identical stream per evaluation
            return reduce_mean(t, dropout(t, a, 0.5, true, drop));
        };
        CHECK(max_grad_error(f, {a}) < tol);
    }
}

TEST_CASE("dropout semantics") {
    Tensor a = Tensor::full({1000}, 1.0);
    Rng rng(5);
    Tensor kept = dropout(nullptr, reshape(nullptr, a, {10, 100}), 0.2, true, rng);
    double sum = 0;
    int zeros = 0;
    for (double v : kept.values()) {
        if (v == 0.0)
            ++zeros;
        else
            CHECK(v == doctest::Approx(1.0 / 0.8));
        sum += v;
    }
    CHECK(zeros > 100);
    CHECK(zeros < 300);
    CHECK(sum / 1000.0 == doctest::Approx(1.0).epsilon(0.1));

    // eval mode is the identity
    Rng rng2(5);
    Tensor same = dropout(nullptr, a, 0.2, false, rng2);
    CHECK(same.values() == a.values());

    // identical seeds give identical masks
    Rng r1(123), r2(123);
    Tensor d1 = dropout(nullptr, a, 0.3, true, r1);
    Tensor d2 = dropout(nullptr, a, 0.3, true, r2);
    CHECK(d1.values() == d2.values());
}

TEST_CASE("concat then complementary slices reconstruct the inputs") {
    Rng rng(11);
    Tensor a = random_tensor({3, 2}, rng, -2, 2, false);
    Tensor b = random_tensor({3, 5}, rng, -2, 2, false);
    Tensor cat = concat(nullptr, {a, b}, 1);
    Tensor a2 = slice(nullptr, cat, 1, 0, 2);
    Tensor b2 = slice(nullptr, cat, 1, 2, 5);
    CHECK(a2.values() == a.values());
    CHECK(b2.values() == b.values());

    Tensor cat0 = concat(nullptr, {a, a}, 0);
    CHECK(slice(nullptr, cat0, 0, 3, 3).values() == a.values());
}

TEST_CASE("non-finite results raise NumericError") {
    CHECK_THROWS_AS(log(nullptr, Tensor({1}, {0.0})), NumericError);
    CHECK_THROWS_AS(div(nullptr, Tensor({1}, {1.0}), Tensor({1}, {0.0})), NumericError);
    CHECK_THROWS_AS(exp(nullptr, Tensor({1}, {1e6})), NumericError);
}
