#include <catch2/catch_amalgamated.hpp>

#include "toy.hpp"

using namespace drpc;
using Catch::Approx;

namespace {

ParamStore<double> dep_store(std::size_t ctx, std::size_t hidden, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.attn_dim = ctx;
    cfg.dep_hidden = hidden;
    ParamStore<double> store;
    Rng rng(seed);
    add_dep_params(store, cfg, rng);
    toy::randomize(store, seed + 1);
    return store;
}

AdjacencyTarget chain(std::size_t n) {
    std::vector<int> head(n);
    for (std::size_t i = 0; i < n; ++i) head[i] = static_cast<int>(i) - 1;
    DependencyTree t{head, std::vector<std::string>(n, "dep")};
    return adjacency_from_tree(t, n);
}

Tensor<double> probs_matrix(std::size_t n, std::vector<double> v) { return Tensor<double>({n, n}, std::move(v)); }

double loss_of(const Tensor<double>& p, const AdjacencyTarget& a) {
    Tape<double> tape;
    return dep_loss(tape.constant(p), a).value().item();
}

}  // namespace

TEST_CASE("zero output weights give probability one half everywhere", "[depsupervise]") {
    auto store = dep_store(4, 3, 1);
    for (auto& v : store.at("dep.W2").values()) v = 0;
    store.at("dep.b2")[0] = 0;
    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto p = edge_probs(bind, tape.constant(toy::random_tensor<double>({4, 4}, 2)));
    CHECK(p.rows() == 4);
    CHECK(p.cols() == 4);
    for (auto v : p.value().values()) CHECK(v == 0.5);

    auto single = edge_probs(bind, tape.constant(toy::random_tensor<double>({1, 4}, 3)));
    CHECK(single.value().shape() == Shape{1, 1});
}

TEST_CASE("edge probability matches a scalar evaluation", "[depsupervise]") {
    // h'_1 = [0.5, -1], h'_2 = [2, 0.25]; W1 is 2 x 4, W2 is 1 x 2.
    ParamStore<double> store;
    store.add("dep.W1", Tensor<double>::matrix({{0.1, -0.2, 0.3, 0.4}, {-0.5, 0.6, 0.7, -0.8}}));
    store.add("dep.b1", Tensor<double>::vector({0.05, -0.1}));
    store.add("dep.W2", Tensor<double>::matrix({{1.5, -2.0}}));
    store.add("dep.b2", Tensor<double>::vector({0.3}));
    const double h1[] = {0.5, -1}, h2[] = {2, 0.25};

    // [h'_1, h'_2] = [0.5, -1, 2, 0.25]
    const double z1 = 0.1 * 0.5 - 0.2 * -1 + 0.3 * 2 + 0.4 * 0.25 + 0.05;
    const double z2 = -0.5 * 0.5 + 0.6 * -1 + 0.7 * 2 - 0.8 * 0.25 - 0.1;
    const double a12 = toy::sigmoid(1.5 * std::tanh(z1) - 2.0 * std::tanh(z2) + 0.3);
    // [h'_2, h'_1] = [2, 0.25, 0.5, -1]
    const double y1 = 0.1 * 2 - 0.2 * 0.25 + 0.3 * 0.5 + 0.4 * -1 + 0.05;
    const double y2 = -0.5 * 2 + 0.6 * 0.25 + 0.7 * 0.5 - 0.8 * -1 - 0.1;
    const double a21 = toy::sigmoid(1.5 * std::tanh(y1) - 2.0 * std::tanh(y2) + 0.3);

    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto ctx = tape.constant(Tensor<double>::matrix({{h1[0], h1[1]}, {h2[0], h2[1]}}));
    auto p = edge_probs(bind, ctx).value();
    CHECK(std::abs(p(0, 1) - a12) < 1e-12);
    CHECK(std::abs(p(1, 0) - a21) < 1e-12);
    CHECK(p(0, 1) != p(1, 0));

    auto pr = edge_probs(bind, ctx, Nonlinearity::relu).value();
    const double r12 = toy::sigmoid(1.5 * std::max(z1, 0.0) - 2.0 * std::max(z2, 0.0) + 0.3);
    CHECK(std::abs(pr(0, 1) - r12) < 1e-12);
}

TEST_CASE("dependency loss closed forms", "[depsupervise]") {
    CHECK(std::abs(loss_of(probs_matrix(2, {0.5, 0.5, 0.5, 0.5}), chain(2)) - 4 * std::log(2.0)) < 1e-9);
    CHECK(std::abs(loss_of(probs_matrix(1, {0.5}), chain(1)) - std::log(2.0)) < 1e-9);
    CHECK(loss_of(probs_matrix(2, {0.5, 0.5, 0.5, 0.5}), chain(2)) == Approx(2.772589).margin(1e-6));

    const double eps = 1e-6;
    const auto a = chain(3);
    Tensor<double> p({3, 3});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) p(i, j) = a(i, j) ? 1 - eps : eps;
    const double l = loss_of(p, a);
    CHECK(l < 1e-4);
    CHECK(std::abs(l + 9 * std::log1p(-eps)) < 1e-12);

    CHECK_THROWS_AS(loss_of(probs_matrix(1, {1.0}), chain(1)), DomainError);
    CHECK_THROWS_AS(loss_of(probs_matrix(1, {0.0}), chain(1)), DomainError);
    CHECK_THROWS_AS(loss_of(probs_matrix(2, {0.5, 0.5, 0.5, 0.5}), chain(3)), DimensionError);
}

TEST_CASE("dependency loss properties", "[depsupervise][property]") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = rng.between(1, 7);
        const auto a = chain(n);
        Tensor<double> p({n, n});
        for (auto& v : p.values()) v = rng.uniform(0.01, 0.99);
        const double base = loss_of(p, a);
        REQUIRE(base >= 0);

        Tape<double> tape;
        Tensor<double> logits({n, n});
        for (std::size_t k = 0; k < p.size(); ++k) logits[k] = std::log(p[k] / (1 - p[k]));
        REQUIRE(dep_loss_from_logits(tape.constant(logits), a).value().item() == Approx(base).epsilon(1e-12));

        // every ordered pair, the diagonal included, is counted
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                Tensor<double> q = p;
                q(i, j) = a(i, j) ? q(i, j) * 0.9 : q(i, j) * 0.5;
                const double moved = loss_of(q, a);
                REQUIRE(moved != base);
                if (!a(i, j)) REQUIRE(moved < base);  // pushing a non-edge toward 0 helps
            }
    }
}

TEST_CASE("dependency head gradients pass the finite-difference check", "[depsupervise][gradcheck]") {
    auto store = dep_store(4, 5, 8);
    const auto ctx = toy::random_tensor<double>({4, 4}, 9);
    const auto a = chain(4);
    for (bool literal : {true, false}) {
        auto f = [&](ParamBinding<double>& bind) {
            auto c = bind.tape().constant(ctx);
            return literal ? dep_loss(edge_probs(bind, c), a) : dep_loss_from_logits(edge_logits(bind, c), a);
        };
        auto report = grad_check<double>(f, store, 1e-5, 1e-4);
        INFO(toy::describe(report));
        CHECK(report.passed);
        CHECK(report.find("dep.W1")->checked == 20 * 2);
        CHECK(report.find("dep.W2")->checked == 5);
    }
}

TEST_CASE("edge agreements by hand", "[depsupervise]") {
    const AdjacencyTarget chain = adjacency_from_tree(DependencyTree{{kRoot, 0, 1}, {"root", "x", "x"}}, 3);
    Tensor<double> p({3, 3}, 0.2);
    CHECK(edge_agreements(p, chain) == 5);
    p(0, 1) = p(1, 0) = 0.9;
    p(2, 2) = 0.7;
    CHECK(edge_agreements(p, chain) == 6);
    CHECK(edge_agreements(p, chain, 0.95) == 5);
    CHECK_THROWS_AS(edge_agreements(Tensor<double>({2, 2}), chain), DimensionError);
}
