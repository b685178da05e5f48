// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "phishdetect/gradcheck.hpp"
#include "phishdetect/ops.hpp"
#include "phishdetect/optimizer.hpp"

using namespace phishdetect;

namespace {

Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) {
        v = rng.normal(0.0, stddev);
    }
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Independent gated-recurrence oracle, written against the weight layout
// directly rather than through the op kernels.
struct ReferenceLstm {
    int units;
    int embed;
    std::vector<double> wx, wh, b;

    void step(const std::vector<double>& x, std::vector<double>& h,
              std::vector<double>& c) const {
        std::vector<double> hn(static_cast<std::size_t>(units));
        std::vector<double> cn(static_cast<std::size_t>(units));
        auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        for (int u = 0; u < units; ++u) {
            auto gate = [&](int block) {
                const int row = block * units + u;
                double acc = b[static_cast<std::size_t>(row)];
                for (int e = 0; e < embed; ++e) {
                    acc += wx[static_cast<std::size_t>(row) * embed + e] *
                           x[static_cast<std::size_t>(e)];
                }
                for (int v = 0; v < units; ++v) {
                    acc += wh[static_cast<std::size_t>(row) * units + v] *
                           h[static_cast<std::size_t>(v)];
                }
                return acc;
            };
            const double ig = sig(gate(0));
            const double fg = sig(gate(1));
            const double gg = std::tanh(gate(2));
            const double og = sig(gate(3));
            cn[static_cast<std::size_t>(u)] = fg * c[static_cast<std::size_t>(u)] + ig * gg;
            hn[static_cast<std::size_t>(u)] = og * std::tanh(cn[static_cast<std::size_t>(u)]);
        }
        h = hn;
        c = cn;
    }
};

}  // namespace

TEST_CASE("elementwise forward fixtures") {
    Tape tape;
    CHECK(sigmoid(tape, Tensor::scalar(0.0)).item() == doctest::Approx(0.5));
    CHECK(relu(tape, Tensor::scalar(-3.0)).item() == 0.0);
    CHECK(relu(tape, Tensor::scalar(3.0)).item() == 3.0);
    CHECK(tanh_op(tape, Tensor::scalar(0.0)).item() == 0.0);
}

TEST_CASE("conv2d all-ones 2x2 valid gives the element sum") {
    Tape tape;
    Tensor input = Tensor::full({1, 2, 2}, 1.0);
    Tensor kernel = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor out = conv2d(tape, input, kernel);
    CHECK(out.shape() == Shape{1, 1, 1});
    CHECK(out.item() == doctest::Approx(4.0));
}

TEST_CASE("conv2d shape and padding arithmetic") {
    Tape tape;
    Rng rng(1);
    Tensor input = randn({3, 8, 8}, rng);
    Tensor k3 = randn({4, 3, 3, 3}, rng);

    CHECK(conv2d(tape, input, k3, 1, Padding::valid).shape() == Shape{4, 6, 6});
    CHECK(conv2d(tape, input, k3, 1, Padding::same).shape() == Shape{4, 8, 8});
    CHECK(conv2d(tape, input, k3, 2, Padding::same).shape() == Shape{4, 4, 4});

    Tensor bad_kernel = randn({4, 2, 3, 3}, rng);
    CHECK_THROWS_AS(conv2d(tape, input, bad_kernel), ShapeError);
}

TEST_CASE("forward_op dispatch and error contracts") {
    Tape tape;
    std::vector<Tensor> two = {Tensor::scalar(1.0), Tensor::scalar(2.0)};
    CHECK(forward_op(tape, "add", two).item() == doctest::Approx(3.0));
    CHECK_THROWS_AS(forward_op(tape, "quaternion_rotate", two), UnsupportedOpError);

    std::vector<Tensor> mismatched = {Tensor::zeros({2}), Tensor::zeros({3})};
    CHECK_THROWS_AS(forward_op(tape, "add", mismatched), ShapeError);
}

TEST_CASE("forward ops do not mutate their inputs") {
    Rng rng(7);
    Tensor a = randn({4}, rng, 1.0, true);
    Tensor b = randn({4}, rng, 1.0, true);
    std::vector<double> a_before(a.data().begin(), a.data().end());
    std::vector<double> b_before(b.data().begin(), b.data().end());

    Tape tape;
    Tensor y = mul(tape, add(tape, a, b), sub(tape, a, b));
    tape.backward(sum(tape, y));

    CHECK(std::equal(a_before.begin(), a_before.end(), a.data().begin()));
    CHECK(std::equal(b_before.begin(), b_before.end(), b.data().begin()));
}

TEST_CASE("backward fixtures") {
    SUBCASE("sum of squares") {
        Tape tape;
        Tensor x = Tensor::from_data({1}, {3.0}, true);
        Tensor loss = sum(tape, mul(tape, x, x));
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(6.0));
    }
    SUBCASE("sigmoid of dot product at zero weight") {
        Tape tape;
        Tensor w = Tensor::from_data({1, 1}, {0.0}, true);
        Tensor x = Tensor::from_data({1}, {1.0});
        Tensor loss = sigmoid(tape, matmul(tape, w, x));
        tape.backward(loss);
        CHECK(w.grad()[0] == doctest::Approx(0.25));
    }
    SUBCASE("non-scalar loss rejected") {
        Tape tape;
        Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
        Tensor y = mul(tape, x, x);
        CHECK_THROWS_AS(tape.backward(y), ShapeError);
    }
    SUBCASE("empty tape rejected") {
        Tape tape;
        CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0, true)), DataError);
    }
}

TEST_CASE("backward is linear over loss terms") {
    Rng rng(11);
    auto grads_of = [&](bool first, bool second, const Tensor& w0) {
        Tensor w = w0.clone();
        Tape tape;
        std::vector<Tensor> terms;
        if (first) terms.push_back(sum(tape, mul(tape, w, w)));
        if (second) terms.push_back(sum(tape, tanh_op(tape, w)));
        Tensor loss = terms.size() == 2 ? add(tape, terms[0], terms[1]) : terms[0];
        tape.backward(loss);
        return std::vector<double>(w.grad().begin(), w.grad().end());
    };

    Tensor w0 = randn({6}, rng, 0.7, true);
    auto combined = grads_of(true, true, w0);
    auto g1 = grads_of(true, false, w0);
    auto g2 = grads_of(false, true, w0);
    for (std::size_t i = 0; i < combined.size(); ++i) {
        CHECK(combined[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
    }
}

TEST_CASE("lstm_cell fixtures") {
    const int units = 3;
    const int embed = 2;
    Tensor wx = Tensor::zeros({4 * units, embed}, true);
    Tensor wh = Tensor::zeros({4 * units, units}, true);
    Tensor b = Tensor::zeros({4 * units}, true);
    Tensor x = Tensor::zeros({embed});
    Tensor h0 = Tensor::zeros({units});

    SUBCASE("all-zero weights and state give zero output") {
        Tape tape;
        auto out = lstm_cell(tape, x, h0, Tensor::zeros({units}), wx, wh, b);
        for (double v : out.h.data()) CHECK(v == 0.0);
        for (double v : out.c.data()) CHECK(v == 0.0);
    }

    SUBCASE("large forget bias carries the cell state through") {
        Tensor bf = Tensor::zeros({4 * units}, true);
        for (int u = 0; u < units; ++u) {
            bf.data_mut()[static_cast<std::size_t>(units + u)] = 1e3;
        }
        Tensor c_prev = Tensor::full({units}, 1.0);
        Tape tape;
        auto out = lstm_cell(tape, x, h0, c_prev, wx, wh, bf);
        for (int u = 0; u < units; ++u) {
            CHECK(out.c.data()[static_cast<std::size_t>(u)] == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("lstm_cell and lstm_sequence match the independent reference") {
    const int units = 4;
    const int embed = 3;
    const int steps = 5;
    Rng rng(42);

    ReferenceLstm ref{units, embed, {}, {}, {}};
    Tensor wx = randn({4 * units, embed}, rng, 0.5, true);
    Tensor wh = randn({4 * units, units}, rng, 0.5, true);
    Tensor b = randn({4 * units}, rng, 0.5, true);
    ref.wx.assign(wx.data().begin(), wx.data().end());
    ref.wh.assign(wh.data().begin(), wh.data().end());
    ref.b.assign(b.data().begin(), b.data().end());

    Tensor xs = randn({steps, embed}, rng, 1.0);

    // Reference recurrence over the whole sequence.
    std::vector<double> h_ref(units, 0.0);
    std::vector<double> c_ref(units, 0.0);
    for (int t = 0; t < steps; ++t) {
        std::vector<double> xt(xs.data().begin() + t * embed,
                               xs.data().begin() + (t + 1) * embed);
        ref.step(xt, h_ref, c_ref);
    }

    // Step-by-step through lstm_cell.
    Tape tape;
    Tensor h = Tensor::zeros({units});
    Tensor c = Tensor::zeros({units});
    for (int t = 0; t < steps; ++t) {
        Tensor xt = slice(tape, reshape(tape, xs, {steps * embed}), t * embed, embed);
        auto out = lstm_cell(tape, xt, h, c, wx, wh, b);
        h = out.h;
        c = out.c;
    }
    for (int u = 0; u < units; ++u) {
        CHECK(h.data()[static_cast<std::size_t>(u)] ==
              doctest::Approx(h_ref[static_cast<std::size_t>(u)]).epsilon(1e-12));
    }

    // Fused sequence op agrees too.
    Tensor fused = lstm_sequence(tape, xs, wx, wh, b);
    for (int u = 0; u < units; ++u) {
        CHECK(fused.data()[static_cast<std::size_t>(u)] ==
              doctest::Approx(h_ref[static_cast<std::size_t>(u)]).epsilon(1e-12));
    }
}

TEST_CASE("gradient_check fixtures") {
    SUBCASE("quadratic") {
        auto f = [](Tape& t, const Tensor& x) { return sum(t, mul(t, x, x)); };
        auto report = gradient_check(f, Tensor::from_data({1}, {1.0}));
        CHECK(report.pass);
        CHECK(report.coords[0].analytic == doctest::Approx(2.0));
        CHECK(report.coords[0].numeric == doctest::Approx(2.0).epsilon(1e-8));
        CHECK(report.max_rel_error < 1e-8);
    }

    SUBCASE("lstm_cell output component at a random point") {
        const int units = 3;
        const int embed = 2;
        Rng rng(5);
        Tensor wh = randn({4 * units, units}, rng, 0.4);
        Tensor b = randn({4 * units}, rng, 0.4);
        Tensor x = randn({embed}, rng);
        Tensor h0 = randn({units}, rng, 0.3);
        Tensor c0 = randn({units}, rng, 0.3);
        auto f = [&](Tape& t, const Tensor& wx) {
            auto out = lstm_cell(t, x, h0, c0, wx, wh, b);
            return sum(t, out.h);
        };
        auto report = gradient_check(f, randn({4 * units, embed}, rng, 0.4));
        CHECK(report.pass);
    }

    SUBCASE("a wrong backward rule is caught") {
        // Forward computes x^2 but claims dy/dx = 3x.
        auto broken = [](Tape& t, const Tensor& x) {
            std::vector<double> out(x.data().begin(), x.data().end());
            for (auto& v : out) v = v * v;
            Tensor y = Tensor::from_data(x.shape(), std::move(out));
            y.set_requires_grad(true);
            t.record("broken_square", {x}, y, [x, y]() mutable {
                auto g = y.grad();
                std::vector<double> gin(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gin[i] = g[i] * 3.0 * x.data()[i];
                }
                x.accumulate_grad(gin);
            });
            return sum(t, y);
        };
        auto report = gradient_check(broken, Tensor::from_data({2}, {1.5, -0.7}));
        CHECK_FALSE(report.pass);
    }

    SUBCASE("non-finite values at perturbed points are reported") {
        auto f = [](Tape& t, const Tensor& x) {
            // log of a negative number once perturbed below zero
            std::vector<double> out(x.data().begin(), x.data().end());
            for (auto& v : out) v = std::log(v);
            Tensor y = Tensor::from_data(x.shape(), std::move(out));
            return sum(t, y);
        };
        CHECK_THROWS_AS(gradient_check(f, Tensor::from_data({1}, {1e-4})), DivergenceError);
    }
}

TEST_CASE("finite-difference pass over every differentiable op") {
    Rng rng(99);
    const double tol = 1e-4;

    auto check = [&](const char* name, const ScalarFn& f, const Tensor& point) {
        auto report = gradient_check(f, point, 1e-3, tol);
        INFO(name, " max rel error ", report.max_rel_error);
        CHECK(report.pass);
    };

    check("add", [&](Tape& t, const Tensor& x) {
        Tensor other = Tensor::full(x.shape(), 0.7);
        return sum(t, add(t, x, other));
    }, randn({5}, rng));

    check("sub", [&](Tape& t, const Tensor& x) {
        Tensor other = Tensor::full(x.shape(), 0.3);
        return sum(t, sub(t, x, other));
    }, randn({5}, rng));

    check("mul", [&](Tape& t, const Tensor& x) {
        return sum(t, mul(t, x, x));
    }, randn({5}, rng));

    check("scale+add_scalar", [&](Tape& t, const Tensor& x) {
        return sum(t, add_scalar(t, scale(t, x, -2.5), 1.0));
    }, randn({5}, rng));

    check("matmul", [&](Tape& t, const Tensor& x) {
        Tensor rhs = Tensor::from_data({3, 2}, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5});
        return sum(t, matmul(t, x, rhs));
    }, randn({2, 3}, rng));

    check("relu", [&](Tape& t, const Tensor& x) {
        return sum(t, relu(t, x));
    }, Tensor::from_data({4}, {0.8, -0.6, 1.2, -1.5}));  // away from the kink

    check("sigmoid", [&](Tape& t, const Tensor& x) { return sum(t, sigmoid(t, x)); },
          randn({5}, rng));
    check("tanh", [&](Tape& t, const Tensor& x) { return sum(t, tanh_op(t, x)); },
          randn({5}, rng));
    check("mean", [&](Tape& t, const Tensor& x) { return mean(t, mul(t, x, x)); },
          randn({6}, rng));

    check("conv2d valid with bias", [&](Tape& t, const Tensor& k) {
        Tensor input = Tensor::from_data({2, 4, 4}, [&] {
            std::vector<double> v(32);
            Rng r(3);
            for (auto& e : v) e = r.normal();
            return v;
        }());
        Tensor bias = Tensor::from_data({2}, {0.1, -0.2});
        return sum(t, conv2d(t, input, k, bias, 1, Padding::valid));
    }, randn({2, 2, 3, 3}, rng, 0.5));

    check("conv2d same stride 2 wrt input", [&](Tape& t, const Tensor& in) {
        Tensor k = Tensor::from_data({1, 1, 3, 3},
                                     {0.2, -0.1, 0.4, 0.3, 0.5, -0.6, 0.1, 0.2, -0.3});
        return sum(t, conv2d(t, in, k, 2, Padding::same));
    }, randn({1, 5, 5}, rng));

    check("max_pool2d", [&](Tape& t, const Tensor& in) {
        return sum(t, max_pool2d(t, in, 2));
    }, randn({2, 4, 4}, rng));

    check("global_max_pool", [&](Tape& t, const Tensor& in) {
        return sum(t, global_max_pool(t, in));
    }, randn({3, 3, 3}, rng));

    check("embedding_lookup", [&](Tape& t, const Tensor& table) {
        const std::vector<int> idx = {0, 2, 1, 2};
        return sum(t, embedding_lookup(t, table, idx));
    }, randn({3, 4}, rng));

    check("lstm_sequence wrt xs", [&](Tape& t, const Tensor& xs) {
        Rng r(13);
        Tensor wx = randn({8, 3}, r, 0.4);
        Tensor wh = randn({8, 2}, r, 0.4);
        Tensor b = randn({8}, r, 0.2);
        return sum(t, lstm_sequence(t, xs, wx, wh, b));
    }, randn({4, 3}, rng));

    check("lstm_sequence wrt wh", [&](Tape& t, const Tensor& wh) {
        Rng r(14);
        Tensor xs = randn({4, 3}, r);
        Tensor wx = randn({8, 3}, r, 0.4);
        Tensor b = randn({8}, r, 0.2);
        return sum(t, lstm_sequence(t, xs, wx, wh, b));
    }, randn({8, 2}, rng, 0.4));

    check("dropout (fixed seed)", [&](Tape& t, const Tensor& x) {
        Rng r(21);
        return sum(t, dropout(t, x, 0.5, DropoutMode::train, r));
    }, randn({8}, rng));

    check("concat+slice+reshape", [&](Tape& t, const Tensor& x) {
        Tensor flat = reshape(t, x, {6});
        Tensor left = slice(t, flat, 0, 3);
        Tensor right = slice(t, flat, 3, 3);
        std::vector<Tensor> parts = {mul(t, left, left), right};
        return sum(t, concat(t, parts));
    }, randn({2, 3}, rng));

    check("bce_with_logits", [&](Tape& t, const Tensor& z) {
        return bce_with_logits(t, z, 1.0);
    }, randn({1}, rng));
}

TEST_CASE("sgd step fixtures") {
    SUBCASE("plain update") {
        Tensor p = Tensor::from_data({1}, {1.0}, true);
        p.accumulate_grad(std::vector<double>{0.5});
        Optimizer opt({OptimizerKind::sgd, 0.1});
        std::vector<Tensor> params = {p};
        opt.step(params);
        CHECK(p.data()[0] == doctest::Approx(0.95));
    }
    SUBCASE("zero gradient is a fixed point") {
        Tensor p = Tensor::from_data({1}, {1.0}, true);
        p.accumulate_grad(std::vector<double>{0.0});
        Optimizer opt({OptimizerKind::sgd, 0.1});
        std::vector<Tensor> params = {p};
        opt.step(params);
        CHECK(p.data()[0] == 1.0);
    }
    SUBCASE("momentum two-step recurrence") {
        Tensor p = Tensor::from_data({1}, {0.0}, true);
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::momentum;
        cfg.learning_rate = 0.1;
        cfg.momentum = 0.9;
        Optimizer opt(cfg);
        std::vector<Tensor> params = {p};
        for (int i = 0; i < 2; ++i) {
            p.zero_grad();
            p.accumulate_grad(std::vector<double>{1.0});
            opt.step(params);
        }
        CHECK(p.data()[0] == doctest::Approx(-0.29));
    }
    SUBCASE("non-finite gradient aborts before mutating") {
        Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
        p.accumulate_grad(std::vector<double>{0.1, std::nan("")});
        Optimizer opt({OptimizerKind::sgd, 0.1});
        std::vector<Tensor> params = {p};
        CHECK_THROWS_AS(opt.step(params), DivergenceError);
        CHECK(p.data()[0] == 1.0);
        CHECK(p.data()[1] == 2.0);
    }
    SUBCASE("frozen parameters keep their values and drop gradients") {
        Tensor a = Tensor::from_data({1}, {1.0}, true);
        Tensor b = Tensor::from_data({1}, {1.0}, true);
        a.accumulate_grad(std::vector<double>{1.0});
        b.accumulate_grad(std::vector<double>{1.0});
        Optimizer opt({OptimizerKind::sgd, 0.1});
        std::vector<Tensor> params = {a, b};
        const std::vector<bool> mask = {true, false};
        opt.step(params, mask);
        CHECK(a.data()[0] == doctest::Approx(0.9));
        CHECK(b.data()[0] == 1.0);
        CHECK(b.grad()[0] == 0.0);
    }
}

TEST_CASE("dropout contracts") {
    Rng rng(123);
    Tensor x = Tensor::full({10}, 1.0);
    Tape tape;

    SUBCASE("inference is identity") {
        Tensor y = dropout(tape, x, 0.5, DropoutMode::infer, rng);
        CHECK(y.same_storage(x));
    }
    SUBCASE("rate zero is identity in train mode") {
        Tensor y = dropout(tape, x, 0.0, DropoutMode::train, rng);
        CHECK(y.same_storage(x));
    }
    SUBCASE("rate one is rejected") {
        CHECK_THROWS_AS(dropout(tape, x, 1.0, DropoutMode::train, rng), DataError);
    }
    SUBCASE("inverted scaling keeps the mean within 1% at n=1e6") {
        Tensor big = Tensor::full({1000000}, 1.0);
        Rng r(7);
        Tensor y = dropout(tape, big, 0.5, DropoutMode::train, r);
        double mean_v = 0.0;
        for (double v : y.data()) mean_v += v;
        mean_v /= static_cast<double>(y.size());
        CHECK(std::abs(mean_v - 1.0) < 0.01);
    }
    SUBCASE("deterministic under a fixed seed") {
        Rng r1(9);
        Rng r2(9);
        Tensor y1 = dropout(tape, x, 0.5, DropoutMode::train, r1);
        Tensor y2 = dropout(tape, x, 0.5, DropoutMode::train, r2);
        CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    }
}
