#include <catch2/catch_amalgamated.hpp>

#include "toy.hpp"

using namespace drpc;
using Catch::Approx;

namespace {

ParamStore<double> control_store(std::size_t hidden, std::size_t ctx, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.lstm_hidden = hidden / 2;
    cfg.attn_dim = ctx;
    ParamStore<double> store;
    Rng rng(seed);
    add_control_params(store, cfg, rng);
    toy::randomize(store, seed + 1);
    return store;
}

void zero_biases(ParamStore<double>& store) {
    for (const char* b : {"ctl.bp", "ctl.ba", "ctl.bc"})
        for (auto& v : store.at(b).values()) v = 0;
}

}  // namespace

TEST_CASE("zero mention states with zero bias switch the filter off", "[control]") {
    auto store = control_store(4, 3, 1);
    zero_biases(store);
    Tensor<double> hv = toy::random_tensor<double>({3, 4}, 2);
    for (std::size_t k = 0; k < 4; ++k) hv(0, k) = hv(2, k) = 0;
    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto h = tape.constant(hv);
    auto f = control_filter(bind, h, 0, 2);
    for (auto v : f.p.value().values()) CHECK(v == 0.0);
    for (auto v : f.filtered.value().values()) CHECK(v == 0.0);

    // zero inputs to the gate as well: c = 0 and every gated vector vanishes
    auto g = control_gate(bind, tape.constant(Tensor<double>({3, 4})), f.filtered,
                          tape.constant(toy::random_tensor<double>({3, 3}, 3)), 0, 2);
    for (auto v : g.c.value().values()) CHECK(v == 0.0);
    for (auto v : g.gated.value().values()) CHECK(v == 0.0);
}

TEST_CASE("a zero control coordinate zeroes that coordinate everywhere", "[control]") {
    auto store = control_store(4, 3, 5);
    auto& bp = store.at("ctl.bp");
    auto& wp = store.at("ctl.Wp");
    for (std::size_t k = 0; k < 8; ++k) wp(1, k) = 0;
    bp[1] = -1.0;  // relu(-1) = 0
    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto f = control_filter(bind, tape.constant(toy::random_tensor<double>({5, 4}, 6)), 1, 3);
    CHECK(f.p.value()[1] == 0.0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(f.filtered.value()(i, 1) == 0.0);
}

TEST_CASE("filter and gate match a scalar evaluation", "[control]") {
    // dim(h) = 2, dim(h') = 2, n = 2, s = 0, o = 1
    ParamStore<double> store;
    store.add("ctl.Wp", Tensor<double>::matrix({{0.5, -0.25, 1.0, 0.2}, {-1.0, 0.3, 0.1, 0.4}}));
    store.add("ctl.bp", Tensor<double>::vector({0.1, 0.2}));
    store.add("ctl.Wa", Tensor<double>::matrix({{0.7, -0.3}}));
    store.add("ctl.ba", Tensor<double>::vector({0.05}));
    store.add("ctl.Wc", Tensor<double>::matrix({{0.2, 0.1, -0.3, 0.4, 0.5, -0.6}, {0.3, -0.2, 0.6, 0.1, -0.4, 0.2}}));
    store.add("ctl.bc", Tensor<double>::vector({0.0, 0.1}));
    const double h[2][2] = {{1.0, -0.5}, {0.4, 2.0}};
    const double hc[2][2] = {{-0.3, 0.8}, {1.5, 0.6}};

    const double x[4] = {h[0][0], h[0][1], h[1][0], h[1][1]};
    double p[2];
    p[0] = std::max(0.0, 0.5 * x[0] - 0.25 * x[1] + 1.0 * x[2] + 0.2 * x[3] + 0.1);
    p[1] = std::max(0.0, -1.0 * x[0] + 0.3 * x[1] + 0.1 * x[2] + 0.4 * x[3] + 0.2);
    double hb[2][2], score[2];
    for (int i = 0; i < 2; ++i) {
        hb[i][0] = p[0] * h[i][0];
        hb[i][1] = p[1] * h[i][1];
        score[i] = 0.7 * hb[i][0] - 0.3 * hb[i][1] + 0.05;
    }
    const double e0 = std::exp(score[0]), e1 = std::exp(score[1]);
    const double al[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
    const double m[2] = {al[0] * h[0][0] + al[1] * h[1][0], al[0] * h[0][1] + al[1] * h[1][1]};
    const double in[6] = {m[0], m[1], h[0][0], h[0][1], h[1][0], h[1][1]};
    const double wc[2][6] = {{0.2, 0.1, -0.3, 0.4, 0.5, -0.6}, {0.3, -0.2, 0.6, 0.1, -0.4, 0.2}};
    double c[2] = {0.0, 0.1};
    for (int r = 0; r < 2; ++r) {
        for (int k = 0; k < 6; ++k) c[r] += wc[r][k] * in[k];
        c[r] = std::max(0.0, c[r]);
    }

    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto hv = tape.constant(Tensor<double>::matrix({{h[0][0], h[0][1]}, {h[1][0], h[1][1]}}));
    auto ctx = tape.constant(Tensor<double>::matrix({{hc[0][0], hc[0][1]}, {hc[1][0], hc[1][1]}}));
    auto f = control_filter(bind, hv, 0, 1);
    auto g = control_gate(bind, hv, f.filtered, ctx, 0, 1);
    for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(f.p.value()[k] - p[k]) < 1e-14);
        CHECK(std::abs(g.memory.value()[k] - m[k]) < 1e-14);
        CHECK(std::abs(g.c.value()[k] - c[k]) < 1e-14);
        CHECK(std::abs(g.alpha.value()[k] - al[k]) < 1e-14);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(f.filtered.value()(i, k) - hb[i][k]) < 1e-14);
            CHECK(std::abs(g.gated.value()(i, k) - c[k] * hc[i][k]) < 1e-14);
        }
    }
}

TEST_CASE("token weights: uniform scores and the two-token closed form", "[control]") {
    ParamStore<double> store = control_store(2, 2, 3);
    zero_biases(store);
    store.at("ctl.Wa") = Tensor<double>::matrix({{std::log(2.0), 0.0}});
    Tape<double> tape;
    ParamBinding<double> bind(tape, store);
    auto h = tape.constant(Tensor<double>::matrix({{3.0, -1.0}, {0.0, 5.0}}));
    auto ctx = tape.constant(Tensor<double>({2, 2}));

    auto g = control_gate(bind, h, tape.constant(Tensor<double>::matrix({{1.0, 0.0}, {0.0, 0.0}})), ctx, 0, 1);
    CHECK(g.alpha.value()[0] == Approx(2.0 / 3).margin(1e-15));
    CHECK(g.alpha.value()[1] == Approx(1.0 / 3).margin(1e-15));
    CHECK(g.memory.value()[0] == Approx(2.0).margin(1e-14));
    CHECK(g.memory.value()[1] == Approx(1.0).margin(1e-14));

    auto same = control_gate(bind, h, tape.constant(Tensor<double>::matrix({{0.4, 0.9}, {0.4, 0.9}})), ctx, 0, 1);
    CHECK(same.alpha.value()[0] == 0.5);
    CHECK(same.memory.value()[0] == Approx(1.5).margin(1e-15));
    CHECK(same.memory.value()[1] == Approx(2.0).margin(1e-15));

    auto pooled = control_gate(bind, h, tape.constant(Tensor<double>::matrix({{1.0, 0.0}, {0.0, 0.0}})), ctx, 0, 1,
                               true);
    CHECK(pooled.memory.value()[0] == Approx(2.0 / 3).margin(1e-15));
    CHECK(pooled.memory.value()[1] == Approx(0.0).margin(1e-15));
}

TEST_CASE("control invariants on random inputs", "[control][property]") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t n = rng.between(2, 9);
        auto store = control_store(6, 4, seed);
        Tape<double> tape;
        ParamBinding<double> bind(tape, store);
        const auto hv = toy::random_tensor<double>({n, 6}, seed + 50, 2.0);
        const auto cv = toy::random_tensor<double>({n, 4}, seed + 60, 2.0);
        const std::size_t s = rng.below(n), o = (s + 1 + rng.below(n - 1)) % n;
        auto h = tape.constant(hv);
        auto f = control_filter(bind, h, s, o);
        auto g = control_gate(bind, h, f.filtered, tape.constant(cv), s, o);

        double total = 0;
        for (auto a : g.alpha.value().values()) {
            REQUIRE(a > 0);
            total += a;
        }
        REQUIRE(std::abs(total - 1) < 1e-6);
        for (std::size_t k = 0; k < 6; ++k) {
            double lo = hv(0, k), hi = hv(0, k);
            for (std::size_t i = 1; i < n; ++i) {
                lo = std::min(lo, hv(i, k));
                hi = std::max(hi, hv(i, k));
            }
            REQUIRE(g.memory.value()[k] >= lo - 1e-12);
            REQUIRE(g.memory.value()[k] <= hi + 1e-12);
        }
        for (auto v : f.p.value().values()) REQUIRE(v >= 0);
        for (auto v : g.c.value().values()) REQUIRE(v >= 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < 4; ++k) {
                const double gv = g.gated.value()(i, k);
                REQUIRE((gv == 0 || (gv > 0) == (cv(i, k) > 0)));
            }
    }
}

TEST_CASE("control gradients pass the finite-difference check", "[control][gradcheck]") {
    auto store = control_store(6, 4, 21);
    for (auto& v : store.at("ctl.bp").values()) v = std::abs(v) + 0.2;  // keep most units active
    for (auto& v : store.at("ctl.bc").values()) v = std::abs(v) + 0.2;
    const auto hv = toy::random_tensor<double>({5, 6}, 22);
    const auto cv = toy::random_tensor<double>({5, 4}, 23);
    const auto weights = toy::random_tensor<double>({5, 4}, 24);
    for (bool pooled : {false, true}) {
        auto f = [&](ParamBinding<double>& bind) {
            auto h = bind.tape().constant(hv);
            auto fl = control_filter(bind, h, 1, 3);
            auto g = control_gate(bind, h, fl.filtered, bind.tape().constant(cv), 1, 3, pooled);
            return sum(mul(g.gated, bind.tape().constant(weights)));
        };
        auto report = grad_check<double>(f, store, 1e-5, 1e-4);
        INFO(toy::describe(report));
        CHECK(report.passed);
        for (const char* name : {"ctl.Wp", "ctl.Wa", "ctl.Wc"}) CHECK(report.find(name)->checked > 0);
    }
}
