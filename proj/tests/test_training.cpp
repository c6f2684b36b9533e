#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "drpc/training.hpp"
#include "toy.hpp"

using namespace drpc;
using Catch::Approx;

namespace {

struct Setup {
    Corpus corpus = toy::small_corpus(30, 5);
    ModelConfig cfg = toy::tiny_config();
    Model<double> model;

    explicit Setup(Ablation ab = {}, std::uint64_t seed = 3) {
        cfg.ablation = ab;
        model = init_model<double>(cfg, build_vocabularies(corpus), seed);
        toy::randomize(model.params, seed + 10, 0.3);
    }

    ForwardTrace<double> run(Tape<double>& tape, const RelationInstance& inst, double lambda) const {
        ParamBinding<double> bind(tape, model.params);
        return forward_instance(bind, model, inst, lambda);
    }
};

std::set<std::string> groups_of(const ParamStore<double>& store) {
    std::set<std::string> g;
    for (const auto& e : store) g.insert(param_group(e.name));
    return g;
}

// x <- x - lr * mhat / (sqrt(vhat) + eps) for f(x) = x^2, written out directly.
double adam_scalar_oracle(double x, double lr, int steps) {
    double m = 0, v = 0;
    for (int t = 1; t <= steps; ++t) {
        const double g = 2 * x;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        x -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    return x;
}

TrainConfig quick_config() {
    TrainConfig tc;
    tc.model = toy::tiny_config();
    tc.adam.lr = 1e-3;
    tc.batch_size = 8;
    tc.epochs = 2;
    tc.seed = 4;
    return tc;
}

}  // namespace

TEST_CASE("adam first step and zero gradients", "[training][adam]") {
    ParamStore<double> store;
    store.add("x", Tensor<double>::vector({1.0, -2.0}));
    Adam<double> adam(AdamConfig{0.1, 0.9, 0.999, 1e-8}, store);
    adam.step(store, {Tensor<double>::vector({3.0, -0.5})});
    CHECK(store.at("x")[0] == Approx(1.0 - 0.1).margin(1e-8));
    CHECK(store.at("x")[1] == Approx(-2.0 + 0.1).margin(1e-8));

    const Tensor<double> before = store.at("x");
    const double m0 = adam.first_moment(0)[0], v0 = adam.second_moment(0)[0];
    adam.step(store, {Tensor<double>::vector({0.0, 0.0})});
    CHECK(adam.first_moment(0)[0] == Approx(0.9 * m0).margin(1e-15));
    CHECK(adam.second_moment(0)[0] == Approx(0.999 * v0).margin(1e-15));

    ParamStore<double> fresh;
    fresh.add("y", Tensor<double>::vector({0.5}));
    Adam<double> idle(AdamConfig{}, fresh);
    idle.step(fresh, {Tensor<double>::vector({0.0})});
    CHECK(fresh.at("y")[0] == 0.5);
    CHECK(before.size() == 2);
}

TEST_CASE("adam minimizes x^2 like the scalar recurrence", "[training][adam]") {
    ParamStore<double> store;
    store.add("x", Tensor<double>::vector({5.0}));
    Adam<double> adam(AdamConfig{0.1, 0.9, 0.999, 1e-8}, store);
    for (int t = 0; t < 200; ++t) adam.step(store, {Tensor<double>::vector({2 * store.at("x")[0]})});
    const double oracle = adam_scalar_oracle(5.0, 0.1, 200);
    CHECK(std::abs(store.at("x")[0]) < 0.5);
    CHECK(store.at("x")[0] == Approx(oracle).margin(1e-12));
}

TEST_CASE("adam rejects non-finite gradients by name", "[training][adam]") {
    ParamStore<double> store;
    store.add("a", Tensor<double>::vector({1.0}));
    store.add("b.W", Tensor<double>::vector({1.0}));
    Adam<double> adam(AdamConfig{}, store);
    CHECK_THROWS_WITH(adam.step(store, {Tensor<double>::vector({0.1}), Tensor<double>::vector({std::nan("")})}),
                      Catch::Matchers::ContainsSubstring("b.W"));
    CHECK(store.at("a")[0] == 1.0);
}

TEST_CASE("global norm clipping", "[training]") {
    std::vector<Tensor<double>> g{Tensor<double>::vector({3.0}), Tensor<double>::vector({4.0})};
    CHECK(clip_global_norm(g, 1.0) == Approx(5.0));
    CHECK(g[0][0] == Approx(0.6));
    CHECK(g[1][0] == Approx(0.8));
    CHECK(clip_global_norm(g, 5.0) == Approx(1.0));
    CHECK(g[1][0] == Approx(0.8));
}

TEST_CASE("ablations remove exactly their parameters", "[training][ablation]") {
    const std::set<std::string> base{"embed", "lstm", "cls"};
    auto with = [&](std::set<std::string> extra) {
        extra.insert(base.begin(), base.end());
        return extra;
    };
    CHECK(groups_of(Setup(Ablation::from_name("full")).model.params) == with({"attn", "dep", "ctl"}));
    CHECK(groups_of(Setup(Ablation::from_name("no_CM")).model.params) == with({"attn", "dep"}));
    CHECK(groups_of(Setup(Ablation::from_name("no_DP_CM")).model.params) == with({"attn"}));
    CHECK(groups_of(Setup(Ablation::from_name("no_SA_DP_CM")).model.params) == base);
    CHECK(groups_of(Setup(Ablation::from_name("no_DP")).model.params) == with({"attn", "ctl"}));
    CHECK(groups_of(Setup(Ablation::from_name("no_SA")).model.params) == with({"dep", "ctl"}));
    for (const char* n : {"full", "no_CM", "no_DP_CM", "no_SA_DP_CM", "no_DP", "no_SA"})
        CHECK(Ablation::from_name(n).name() == n);
    CHECK_THROWS_WITH(Ablation::from_name("bogus"), Catch::Matchers::ContainsSubstring("bogus"));

    // the gradient map holds nothing outside the live groups
    for (const char* n : {"full", "no_CM", "no_DP_CM", "no_SA_DP_CM"}) {
        Setup s(Ablation::from_name(n));
        Tape<double> tape;
        auto tr = s.run(tape, s.corpus.instances[0], 0.01);
        tape.backward(tr.loss_total);
        for (std::size_t i = 0; i < s.model.params.size(); ++i) REQUIRE(tape.parameter_grad(i) != nullptr);
    }
}

TEST_CASE("aggregation width under ablations", "[training][ablation]") {
    Setup full;
    Setup bare(Ablation::from_name("no_SA_DP_CM"));
    Tape<double> tape;
    const auto& inst = full.corpus.instances[0];
    CHECK(full.run(tape, inst, 0.01).o.cols() == 2 * 12 + 3 * 6);
    CHECK(bare.run(tape, inst, 0.01).o.cols() == 5 * 12);
}

TEST_CASE("loss decomposition and the lambda = 0 path", "[training][property]") {
    Setup s;
    for (std::size_t k = 0; k < s.corpus.size(); ++k) {
        const auto& inst = s.corpus.instances[k];
        Tape<double> tape;
        auto a = s.run(tape, inst, 0.01);
        auto z = s.run(tape, inst, 0.0);
        const double label = a.loss_label.value().item(), dep = a.loss_dep.value().item();
        REQUIRE(std::bit_cast<std::uint64_t>(z.loss_total.value().item()) ==
                std::bit_cast<std::uint64_t>(z.loss_label.value().item()));
        REQUIRE(z.loss_label.value().item() == label);
        const double diff = a.loss_total.value().item() - z.loss_total.value().item();
        REQUIRE(std::abs(diff - 0.01 * dep) <= 1e-9 * std::abs(0.01 * dep));
    }
}

TEST_CASE("full versus no_DP on shared parameters", "[training][ablation]") {
    Setup full;
    Setup nodp(Ablation::from_name("no_DP"));
    for (std::size_t i = 0; i < nodp.model.params.size(); ++i)
        nodp.model.params[i].value = full.model.params.at(nodp.model.params[i].name);
    const auto& inst = full.corpus.instances[2];
    Tape<double> tape;
    auto a = full.run(tape, inst, 0.01);
    auto b = nodp.run(tape, inst, 0.01);
    CHECK(a.loss_label.value().item() == b.loss_label.value().item());
    CHECK(b.loss_total.value().item() == b.loss_label.value().item());
    CHECK(a.loss_total.value().item() - b.loss_total.value().item() ==
          Approx(0.01 * a.loss_dep.value().item()).epsilon(1e-9));
}

TEST_CASE("forward pass is deterministic", "[training]") {
    Setup s;
    Tape<double> t1, t2;
    auto a = s.run(t1, s.corpus.instances[4], 0.01);
    auto b = s.run(t2, s.corpus.instances[4], 0.01);
    CHECK(a.loss_total.value().item() == b.loss_total.value().item());
    CHECK(a.prediction.probs.value() == b.prediction.probs.value());
    CHECK(a.edge_probs.value() == b.edge_probs.value());
}

TEST_CASE("every parameter group receives gradient", "[training]") {
    Setup s;
    Tape<double> tape;
    auto tr = s.run(tape, s.corpus.instances[1], 0.01);
    tape.backward(tr.loss_total);
    const auto grads = collect_gradients(tape, s.model.params);
    std::map<std::string, double> by_group;
    for (std::size_t i = 0; i < grads.size(); ++i)
        for (auto v : grads[i].values()) by_group[param_group(s.model.params[i].name)] += std::abs(v);
    CHECK(by_group.size() == 6);
    for (const auto& [g, total] : by_group) {
        INFO(g);
        CHECK(total > 0);
    }
    // the dependency head is reached only through its own loss
    Tape<double> t0;
    auto z = s.run(t0, s.corpus.instances[1], 0.0);
    t0.backward(z.loss_total);
    CHECK(t0.parameter_grad(s.model.params.slot("dep.W1")) == nullptr);
}

TEST_CASE("full model gradients pass the finite-difference check", "[training][gradcheck]") {
    for (const char* ab : {"full", "no_CM", "no_SA_DP_CM"}) {
        Setup s(Ablation::from_name(ab), 7);
        const auto& inst = s.corpus.instances[0];
        auto f = [&](ParamBinding<double>& bind) { return forward_instance(bind, s.model, inst, 0.01).loss_total; };
        auto report = grad_check<double>(f, s.model.params, 1e-5, 1e-4);
        INFO(ab << "\n" << toy::describe(report));
        CHECK(report.passed);
    }
}

TEST_CASE("batch loss does not depend on instance order", "[training][property]") {
    Setup s;
    std::vector<const RelationInstance*> batch;
    for (std::size_t i = 0; i < 6; ++i) batch.push_back(&s.corpus.instances[i]);
    auto a = batch_gradient(s.model, batch, 0.01);
    std::reverse(batch.begin(), batch.end());
    auto b = batch_gradient(s.model, batch, 0.01);
    CHECK(a.loss_total == Approx(b.loss_total).epsilon(1e-6));
    for (std::size_t p = 0; p < a.grad.size(); ++p)
        for (std::size_t k = 0; k < a.grad[p].size(); ++k) REQUIRE(a.grad[p][k] == Approx(b.grad[p][k]).margin(1e-6));

    auto threaded = batch_gradient(s.model, batch, 0.01, 3);
    CHECK(threaded.loss_total == Approx(b.loss_total).epsilon(1e-12));
}

TEST_CASE("seeded training runs repeat exactly", "[training]") {
    const Corpus corpus = toy::small_corpus(40, 6);
    const Corpus dev = toy::small_corpus(15, 99);
    const auto cfg = quick_config();
    auto a = train<double>(corpus, &dev, cfg);
    auto b = train<double>(corpus, &dev, cfg);
    REQUIRE(a.log.size() == 2);
    for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(to_json(a.log[e]).dump() == to_json(b.log[e]).dump());
    std::ostringstream ca, cb;
    write_checkpoint(ca, a.model, a.info);
    write_checkpoint(cb, b.model, b.info);
    CHECK(ca.str() == cb.str());
    const auto keys = to_json(a.log[0]);
    for (const char* k : {"epoch", "loss_label", "loss_dep", "loss_total", "dev_f1"}) CHECK(keys.contains(k));
}

TEST_CASE("lambda = 0 leaves the dependency head untouched", "[training]") {
    const Corpus corpus = toy::small_corpus(24, 8);
    auto cfg = quick_config();
    cfg.lambda = 0;
    const auto init = init_model<double>(cfg.model, build_vocabularies(corpus), cfg.seed);
    auto r = train<double>(corpus, nullptr, cfg);
    CHECK(r.model.params.at("dep.W1") == init.params.at("dep.W1"));
    CHECK(r.model.params.at("dep.W2") == init.params.at("dep.W2"));
    CHECK(r.model.params.at("cls.W1") != init.params.at("cls.W1"));
}

TEST_CASE("training aborts on a non-finite loss", "[training]") {
    const Corpus corpus = toy::small_corpus(10, 9);
    auto cfg = quick_config();
    cfg.adam.lr = 1e300;
    cfg.clip_norm = 0;
    cfg.epochs = 3;
    CHECK_THROWS_WITH(train<double>(corpus, nullptr, cfg), Catch::Matchers::ContainsSubstring("epoch"));
}

TEST_CASE("checkpoint round-trip reproduces losses", "[training][checkpoint]") {
    Setup s;
    CheckpointInfo info{3, 0.25, {{"note", "x"}}};
    std::stringstream buf;
    write_checkpoint(buf, s.model, info);
    CheckpointInfo back_info;
    auto back = read_checkpoint<double>(buf, &back_info);
    CHECK(back_info.epoch == 3);
    CHECK(back_info.dev_f1 == 0.25);
    CHECK(back.config == s.model.config);
    CHECK(back.vocab == s.model.vocab);
    for (const auto& inst : s.corpus.instances) {
        Tape<double> t1, t2;
        ParamBinding<double> b1(t1, s.model.params), b2(t2, back.params);
        auto x = forward_instance(b1, s.model, inst, 0.01);
        auto y = forward_instance(b2, back, inst, 0.01);
        REQUIRE(x.loss_total.value().item() == y.loss_total.value().item());
    }
    std::stringstream again;
    write_checkpoint(again, back, back_info);
    std::stringstream first;
    write_checkpoint(first, s.model, info);
    CHECK(again.str() == first.str());

    // float32 checkpoints: same behaviour at their own precision
    Model<float> fm = init_model<float>(s.cfg, s.model.vocab, 2);
    std::stringstream fbuf;
    write_checkpoint(fbuf, fm, {});
    auto fb = read_checkpoint<float>(fbuf);
    Tape<float> ft1, ft2;
    ParamBinding<float> fb1(ft1, fm.params), fb2(ft2, fb.params);
    CHECK(forward_instance(fb1, fm, s.corpus.instances[0], 0.01).loss_total.value().item() ==
          forward_instance(fb2, fb, s.corpus.instances[0], 0.01).loss_total.value().item());

    std::stringstream wrong;
    write_checkpoint(wrong, fm, {});
    CHECK_THROWS_WITH(read_checkpoint<double>(wrong), Catch::Matchers::ContainsSubstring("float32"));
    std::stringstream junk("hello");
    CHECK_THROWS_AS(read_checkpoint<double>(junk), CheckpointError);
}

TEST_CASE("config differences are named", "[training][checkpoint]") {
    ModelConfig a, b;
    b.attn_dim = 7;
    b.features.word_dim = 3;
    auto d = json_differences(to_json(a), to_json(b));
    CHECK(d == std::vector<std::string>{"attn_dim", "features.word_dim"});
    CHECK(json_differences(to_json(a), to_json(a)).empty());
}

TEST_CASE("training loss falls over the first epochs on the seed-7 corpus", "[training][slow]") {
    SyntheticSpec spec;
    const Corpus corpus = generate_synthetic(spec, 7);
    TrainConfig cfg;
    cfg.model = toy::desk_config();
    cfg.adam.lr = 1e-3;
    cfg.epochs = 3;
    const auto result = train<double>(corpus, nullptr, cfg);
    REQUIRE(result.log.size() == 3);
    CHECK(result.log[1].loss_total < result.log[0].loss_total);
    CHECK(result.log[2].loss_total < result.log[1].loss_total);
    CHECK(result.log[1].loss_label < result.log[0].loss_label);
    CHECK(result.log[2].loss_label < result.log[1].loss_label);
}
