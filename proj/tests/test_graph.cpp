#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "covidcare/graph.hpp"
#include "oracles.hpp"

using namespace covidcare;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -2.0,
                     double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(r, c);
    for (double& x : t.v) x = u(rng);
    return t;
}

// Builds op(inputs), contracts the output against fixed random weights to a
// scalar, runs backward, and returns the max FD relative error over all
// input scalars. `build` must not capture graph state.
double op_grad_err(const std::vector<Tensor>& inputs, const Tensor& contraction,
                   const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build) {
    auto loss_of = [&](const std::vector<Tensor>& ins) {
        Graph g;
        std::vector<NodeId> ids;
        for (const Tensor& t : ins) ids.push_back(g.param(t));
        NodeId out = build(g, ids);
        NodeId w = g.constant(contraction);
        return g.value(g.sum(g.elementwise_mul(out, w))).v[0];
    };
    Graph g;
    std::vector<NodeId> ids;
    for (const Tensor& t : inputs) ids.push_back(g.param(t));
    NodeId out = build(g, ids);
    NodeId loss = g.sum(g.elementwise_mul(out, g.constant(contraction)));
    g.backward(loss);
    std::vector<Tensor> grads;
    for (NodeId id : ids) grads.push_back(g.grad(id));
    return oracle::max_grad_rel_err(loss_of, inputs, grads);
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
    Graph g;
    Tensor x(1, 3);
    x.v = {0.0, 0.0, 0.0};
    NodeId out = g.softmax_rows(g.constant(x));
    for (double p : g.value(out).v) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("matmul by the identity is the identity map") {
    std::mt19937_64 rng(3);
    Graph g;
    Tensor eye(2, 2);
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    Tensor a = random_tensor(rng, 2, 2);
    NodeId out = g.matmul(g.constant(eye), g.constant(a));
    CHECK(g.value(out).v == a.v);
}

TEST_CASE("sigmoid(0) is one half") {
    Graph g;
    NodeId out = g.sigmoid(g.constant(Tensor::scalar(0.0)));
    CHECK(g.value(out).v[0] == doctest::Approx(0.5));
}

TEST_CASE("identity loss has unit gradient") {
    Graph g;
    NodeId x = g.param(Tensor::scalar(1.7));
    g.backward(x);
    CHECK(g.grad(x).v[0] == doctest::Approx(1.0));
}

TEST_CASE("loss sum(x*x) has gradient 2x") {
    Graph g;
    Tensor x(3, 1);
    x.v = {1.0, 2.0, 3.0};
    NodeId xn = g.param(x);
    NodeId loss = g.sum(g.elementwise_mul(xn, xn));
    g.backward(loss);
    const Tensor& grad = g.grad(xn);
    CHECK(grad.v[0] == doctest::Approx(2.0));
    CHECK(grad.v[1] == doctest::Approx(4.0));
    CHECK(grad.v[2] == doctest::Approx(6.0));
}

TEST_CASE("every op kind passes finite-difference gradient checks over 20 seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);

        {  // matmul
            std::vector<Tensor> ins{random_tensor(rng, 3, 4), random_tensor(rng, 4, 2)};
            Tensor w = random_tensor(rng, 3, 2);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.matmul(id[0], id[1]);
            });
            CHECK(err <= 1e-4);
        }
        {  // add
            std::vector<Tensor> ins{random_tensor(rng, 3, 3), random_tensor(rng, 3, 3)};
            Tensor w = random_tensor(rng, 3, 3);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.add(id[0], id[1]);
            });
            CHECK(err <= 1e-4);
        }
        {  // elementwise-mul
            std::vector<Tensor> ins{random_tensor(rng, 2, 5), random_tensor(rng, 2, 5)};
            Tensor w = random_tensor(rng, 2, 5);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.elementwise_mul(id[0], id[1]);
            });
            CHECK(err <= 1e-4);
        }
        {  // sigmoid
            std::vector<Tensor> ins{random_tensor(rng, 4, 2)};
            Tensor w = random_tensor(rng, 4, 2);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.sigmoid(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // tanh
            std::vector<Tensor> ins{random_tensor(rng, 4, 2)};
            Tensor w = random_tensor(rng, 4, 2);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.tanh(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // softmax-rows
            std::vector<Tensor> ins{random_tensor(rng, 3, 5)};
            Tensor w = random_tensor(rng, 3, 5);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.softmax_rows(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // concat
            std::vector<Tensor> ins{random_tensor(rng, 3, 2), random_tensor(rng, 3, 4)};
            Tensor w = random_tensor(rng, 3, 6);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.concat_cols(id);
            });
            CHECK(err <= 1e-4);
        }
        {  // scale
            std::vector<Tensor> ins{random_tensor(rng, 2, 3)};
            Tensor w = random_tensor(rng, 2, 3);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.scale(id[0], -1.7);
            });
            CHECK(err <= 1e-4);
        }
        {  // log (inputs safely above the clamp floor)
            std::vector<Tensor> ins{random_tensor(rng, 3, 3, 0.1, 3.0)};
            Tensor w = random_tensor(rng, 3, 3);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.log(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // sum
            std::vector<Tensor> ins{random_tensor(rng, 4, 3)};
            Tensor w = random_tensor(rng, 1, 1);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.sum(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // transpose
            std::vector<Tensor> ins{random_tensor(rng, 3, 5)};
            Tensor w = random_tensor(rng, 5, 3);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.transpose(id[0]);
            });
            CHECK(err <= 1e-4);
        }
        {  // slice
            std::vector<Tensor> ins{random_tensor(rng, 6, 3)};
            Tensor w = random_tensor(rng, 3, 3);
            double err = op_grad_err(ins, w, [](Graph& g, const std::vector<NodeId>& id) {
                return g.slice_rows(id[0], 1, 4);
            });
            CHECK(err <= 1e-4);
        }
    }
}

TEST_CASE("randomized three-layer composite matches finite differences") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<Tensor> ins{random_tensor(rng, 4, 3), random_tensor(rng, 4, 4),
                                random_tensor(rng, 4, 1)};
        Tensor x = random_tensor(rng, 3, 1);

        auto loss_of = [&x](const std::vector<Tensor>& ws) {
            Graph g;
            NodeId w1 = g.param(ws[0]), w2 = g.param(ws[1]), w3 = g.param(ws[2]);
            NodeId h1 = g.tanh(g.matmul(w1, g.constant(x)));
            NodeId h2 = g.sigmoid(g.matmul(w2, h1));
            NodeId out = g.sum(g.elementwise_mul(h2, w3));
            return g.value(out).v[0];
        };

        Graph g;
        NodeId w1 = g.param(ins[0]), w2 = g.param(ins[1]), w3 = g.param(ins[2]);
        NodeId h1 = g.tanh(g.matmul(w1, g.constant(x)));
        NodeId h2 = g.sigmoid(g.matmul(w2, h1));
        NodeId loss = g.sum(g.elementwise_mul(h2, w3));
        g.backward(loss);
        std::vector<Tensor> grads{g.grad(w1), g.grad(w2), g.grad(w3)};
        CHECK(oracle::max_grad_rel_err(loss_of, ins, grads) <= 1e-4);
    }
}

TEST_CASE("backward of a summed pair of losses equals the sum of separate backwards") {
    std::mt19937_64 rng(42);
    Tensor xv = random_tensor(rng, 3, 1);
    Tensor av = random_tensor(rng, 3, 1);
    Tensor bv = random_tensor(rng, 3, 1);

    auto grad_of = [&](bool first, bool second) {
        Graph g;
        NodeId x = g.param(xv);
        NodeId l1 = g.sum(g.elementwise_mul(x, g.constant(av)));
        NodeId l2 = g.sum(g.elementwise_mul(g.tanh(x), g.constant(bv)));
        NodeId loss;
        if (first && second) loss = g.add(l1, l2);
        else loss = first ? l1 : l2;
        g.backward(loss);
        return g.grad(x);
    };

    Tensor both = grad_of(true, true), only1 = grad_of(true, false), only2 = grad_of(false, true);
    for (std::size_t i = 0; i < both.size(); ++i)
        CHECK(both.v[i] == doctest::Approx(only1.v[i] + only2.v[i]).epsilon(1e-12));
}

TEST_CASE("parameters off the loss path get zero gradients") {
    Graph g;
    NodeId used = g.param(Tensor::scalar(2.0));
    NodeId unused = g.param(Tensor::scalar(5.0));
    NodeId loss = g.elementwise_mul(used, used);
    g.backward(loss);
    CHECK(g.grad(used).v[0] == doctest::Approx(4.0));
    CHECK(g.grad(unused).v[0] == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
    Graph g;
    NodeId x = g.param(Tensor(2, 2, 1.0));
    CHECK_THROWS_AS(g.backward(x), Error);
}

TEST_CASE("shape mismatches report the op and dimensions") {
    Graph g;
    NodeId a = g.constant(Tensor(2, 3, 1.0));
    NodeId b = g.constant(Tensor(2, 3, 1.0));
    CHECK_THROWS_WITH_AS((void)g.matmul(a, b), doctest::Contains("matmul"), Error);
    try {
        (void)g.matmul(a, b);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2x3") != std::string::npos);
    }
    NodeId c = g.constant(Tensor(3, 3, 1.0));
    CHECK_THROWS_WITH_AS((void)g.add(a, c), doctest::Contains("add"), Error);
}

TEST_CASE("ops on finite inputs keep values finite") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Graph g;
        NodeId a = g.param(random_tensor(rng, 4, 4, -50.0, 50.0));
        NodeId out = g.softmax_rows(g.tanh(g.matmul(a, g.sigmoid(a))));
        CHECK(g.value(out).all_finite());
        g.backward(g.sum(out));
        CHECK(g.grad(a).all_finite());
    }
}
