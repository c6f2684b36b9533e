// drpc: train, evaluate and analyse relation classifiers.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "drpc/evaluation.hpp"
#include "drpc/gradcheck.hpp"
#include "drpc/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drpc;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options shared by the commands that build or train a model.
struct ModelFlags {
    std::string config_file;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::string precision = "float32";
    std::string ablation;
    double lr = 0, lambda = 0, clip = 0;
    std::size_t epochs = 0, batch = 0, patience = 0;
    std::size_t word_dim = 0, position_dim = 0, tag_dim = 0, lstm_hidden = 0, attn_dim = 0, dep_hidden = 0,
                ff_hidden = 0, position_window = 0;
    bool no_linguistic = false, scale_attention = false, ff_relu = false, dep_relu = false, pool_filtered = false;
    CLI::App* app = nullptr;

    void attach(CLI::App* cmd, bool training) {
        app = cmd;
        cmd->add_option("--config", config_file, "JSON config file; flags override it")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--jobs", jobs, "worker threads for per-instance work")->check(CLI::PositiveNumber);
        cmd->add_option("--precision", precision, "float32 (default) or float64")
            ->check(CLI::IsMember({"float64", "float32"}));
        cmd->add_option("--ablation", ablation, "full, no_CM, no_DP_CM, no_SA_DP_CM, no_DP or no_SA");
        cmd->add_option("--word-dim", word_dim);
        cmd->add_option("--position-dim", position_dim);
        cmd->add_option("--tag-dim", tag_dim, "entity and chunk tag embedding size");
        cmd->add_option("--position-window", position_window);
        cmd->add_option("--lstm-hidden", lstm_hidden, "LSTM units per direction");
        cmd->add_option("--attn-dim", attn_dim);
        cmd->add_option("--dep-hidden", dep_hidden);
        cmd->add_option("--ff-hidden", ff_hidden);
        cmd->add_flag("--no-linguistic", no_linguistic, "word and position features only");
        cmd->add_flag("--scale-attention", scale_attention);
        cmd->add_flag("--ff-relu", ff_relu);
        cmd->add_flag("--dep-relu", dep_relu);
        cmd->add_flag("--pool-filtered", pool_filtered, "control memory pools filtered states");
        if (!training) return;
        cmd->add_option("--lr", lr)->check(CLI::PositiveNumber);
        cmd->add_option("--lambda", lambda)->check(CLI::NonNegativeNumber);
        cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
        cmd->add_option("--batch", batch)->check(CLI::PositiveNumber);
        cmd->add_option("--clip", clip)->check(CLI::NonNegativeNumber);
        cmd->add_option("--patience", patience);
    }

    bool given(const char* name) const { return app->count(name) > 0; }

    TrainConfig resolve() const {
        TrainConfig c;
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            try {
                update_from_json(c, json::parse(in));
            } catch (const json::exception& e) {
                throw UsageError("bad config file " + config_file + ": " + e.what());
            }
        }
        auto& f = c.model.features;
        if (no_linguistic) {
            const auto keep = f;
            f = FeatureConfig::no_linguistic();
            f.word_dim = keep.word_dim;
            f.position_dim = keep.position_dim;
            f.position_window = keep.position_window;
        }
        if (given("--seed")) c.seed = seed;
        if (given("--jobs")) c.jobs = jobs;
        if (given("--ablation")) {
            try {
                c.model.ablation = Ablation::from_name(ablation);
            } catch (const PreconditionError& e) {
                throw UsageError(e.what());
            }
        }
        if (given("--word-dim")) f.word_dim = word_dim;
        if (given("--position-dim")) f.position_dim = position_dim;
        if (given("--tag-dim")) f.entity_tag_dim = f.chunk_tag_dim = tag_dim;
        if (given("--position-window")) f.position_window = position_window;
        if (given("--lstm-hidden")) c.model.lstm_hidden = lstm_hidden;
        if (given("--attn-dim")) c.model.attn_dim = attn_dim;
        if (given("--dep-hidden")) c.model.dep_hidden = dep_hidden;
        if (given("--ff-hidden")) c.model.ff_hidden = ff_hidden;
        if (scale_attention) c.model.scale_attention = true;
        if (ff_relu) c.model.ff_relu = true;
        if (dep_relu) c.model.dep_nonlinearity = Nonlinearity::relu;
        if (pool_filtered) c.model.memory_from_filtered = true;
        if (app->get_option_no_throw("--lr")) {
            if (given("--lr")) c.adam.lr = lr;
            if (given("--lambda")) c.lambda = lambda;
            if (given("--epochs")) c.epochs = epochs;
            if (given("--batch")) c.batch_size = batch;
            if (given("--clip")) c.clip_norm = clip;
            if (given("--patience")) c.patience = patience;
        }
        try {
            c.validate();
        } catch (const PreconditionError& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

class Manifest {
public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        j_ = {{"command", std::move(command)}, {"started_at", utc_now()}, {"inputs", json::object()},
              {"outputs", json::object()}};
    }
    json& operator[](const char* key) { return j_[key]; }
    void input(const std::string& k, const std::string& v) { j_["inputs"][k] = v; }
    void output(const std::string& k, const std::string& v) { j_["outputs"][k] = v; }

    void write(const fs::path& path) {
        j_["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream out(path);
        out << j_.dump(2) << '\n';
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string corpus, dev, out, embeddings;
    ModelFlags flags;
};

template <class T>
int run_train(const TrainArgs& a) {
    const TrainConfig cfg = a.flags.resolve();
    Manifest manifest("train");
    const Corpus corpus = load_corpus(a.corpus);
    std::optional<Corpus> dev;
    if (!a.dev.empty()) dev = load_corpus(a.dev);
    std::optional<EmbeddingTable> emb;
    if (!a.embeddings.empty()) emb = load_embeddings(a.embeddings);
    fs::create_directories(a.out);
    const fs::path ckpt = fs::path(a.out) / "checkpoint", log = fs::path(a.out) / "log.jsonl";
    std::ofstream log_out(log, std::ios::binary);
    auto result = train<T>(corpus, dev ? &*dev : nullptr, cfg, emb ? &*emb : nullptr, [&](const EpochLog& e) {
        log_out << to_json(e).dump() << '\n';
        log_out.flush();
        std::cerr << "epoch " << e.epoch << " loss " << e.loss_total
                  << (e.dev_f1 ? " dev_f1 " + std::to_string(*e.dev_f1) : std::string()) << '\n';
        return true;
    });
    save_checkpoint(ckpt, result.model, result.info);

    manifest["config"] = to_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["ablation"] = cfg.model.ablation.name();
    manifest["precision"] = precision_name<T>();
    manifest["best_epoch"] = result.info.epoch;
    manifest["best_dev_f1"] = result.info.dev_f1;
    manifest.input("corpus", a.corpus);
    if (!a.dev.empty()) manifest.input("dev", a.dev);
    if (!a.embeddings.empty()) manifest.input("embeddings", a.embeddings);
    manifest.output("checkpoint", ckpt.string());
    manifest.output("log", log.string());
    manifest.write(fs::path(a.out) / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, corpus, domain, out, config_file;
    std::size_t jobs = 1;
};

template <class T>
int run_eval(const EvalArgs& a) {
    Manifest manifest("eval");
    const Model<T> model = load_checkpoint<T>(a.ckpt);
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        json j = json::parse(in);
        if (j.contains("config")) j = j.at("config");  // a run manifest
        TrainConfig expected;
        update_from_json(expected, j);
        const auto diff = json_differences(to_json(expected.model), to_json(model.config));
        if (!diff.empty()) {
            std::string names;
            for (const auto& d : diff) names += (names.empty() ? "" : ", ") + d;
            throw std::runtime_error("config does not match checkpoint; differing fields: " + names);
        }
    }
    Corpus corpus = load_corpus(a.corpus);
    std::vector<RelationInstance> instances;
    for (auto& i : corpus.instances)
        if (a.domain.empty() || i.domain == a.domain) instances.push_back(std::move(i));
    if (instances.empty()) throw std::runtime_error("no instances with domain '" + a.domain + "' in " + a.corpus);
    const ScoreReport report = evaluate(model, instances, a.jobs);
    json j = to_json(report);
    if (!a.domain.empty()) j["domain"] = a.domain;
    const std::string text = j.dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
        return 0;
    }
    write_text(a.out, text);
    manifest["config"] = to_json(model.config);
    manifest["domain"] = a.domain;
    manifest.input("checkpoint", a.ckpt);
    manifest.input("corpus", a.corpus);
    manifest.output("report", a.out);
    manifest.write(a.out + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    double tol = 1e-4, step = 1e-5;
    std::string ablation = "full", out;
    std::uint64_t seed = 1;
};

// A four-token instance with every feature active.
RelationInstance toy_instance() {
    RelationInstance inst;
    inst.sentence.tokens = {{"ent_PER0", "B-PER", "B-NP"}, {"trig_a", "O", "B-VP"}, {"not", "O", "O"},
                            {"ent_LOC1", "B-LOC", "B-NP"}};
    inst.sentence.tree = {{1, kRoot, 1, 1}, {"nsubj", "root", "neg", "obj"}};
    inst.s = 0;
    inst.o = 3;
    inst.label = "A";
    return inst;
}

int run_gradcheck(const GradcheckArgs& a) {
    Manifest manifest("gradcheck");
    Ablation ab;
    try {
        ab = Ablation::from_name(a.ablation);
    } catch (const PreconditionError& e) {
        throw UsageError(e.what());
    }
    const RelationInstance inst = toy_instance();
    RelationInstance other = inst;
    other.label = kNoneLabel;
    ModelConfig cfg;
    cfg.features.word_dim = 8;
    cfg.features.position_dim = cfg.features.entity_tag_dim = cfg.features.chunk_tag_dim = 4;
    cfg.features.position_window = 4;
    cfg.lstm_hidden = 3;  // d_h = 2 x 3 = 6
    cfg.attn_dim = cfg.dep_hidden = cfg.ff_hidden = 6;
    cfg.ablation = ab;
    Model<double> model = init_model<double>(cfg, build_vocabularies(make_corpus({inst, other})), a.seed);
    // generic values away from the small-init regime
    Rng rng(sub_seed(a.seed, "gradcheck"));
    for (std::size_t i = 0; i < model.params.size(); ++i)
        for (auto& v : model.params[i].value.values()) v = rng.uniform(-0.5, 0.5);

    auto f = [&](ParamBinding<double>& bind) { return forward_instance(bind, model, inst, 0.01).loss_total; };
    const GradCheckReport report = grad_check<double>(f, model.params, a.step, a.tol);

    std::map<std::string, GradCheckEntry> groups;
    for (const auto& e : report.entries) {
        auto& g = groups[param_group(e.name)];
        g.name = param_group(e.name);
        g.max_rel_error = std::max(g.max_rel_error, e.max_rel_error);
        g.checked += e.checked;
        g.skipped += e.skipped;
        g.passed = g.passed && e.passed;
        if (!e.passed) g.diagnostic += (g.diagnostic.empty() ? "" : ", ") + e.name;
    }
    json j = {{"ablation", ab.name()}, {"tol", a.tol}, {"step", a.step}, {"passed", report.passed}};
    for (const auto& [name, g] : groups) {
        std::cout << (g.passed ? "PASS " : "FAIL ") << std::left << std::setw(6) << name
                  << " max_rel_error=" << g.max_rel_error << " checked=" << g.checked << " skipped=" << g.skipped
                  << (g.diagnostic.empty() ? "" : " failing: " + g.diagnostic) << '\n';
        j["groups"][name] = {{"passed", g.passed},   {"max_rel_error", g.max_rel_error},
                             {"checked", g.checked}, {"skipped", g.skipped}};
    }
    for (const auto& e : report.entries)
        j["parameters"][e.name] = {
            {"passed", e.passed}, {"max_rel_error", e.max_rel_error}, {"diagnostic", e.diagnostic}};
    if (!a.out.empty()) {
        write_text(a.out, j.dump(2) + "\n");
        manifest["config"] = to_json(cfg);
        manifest["seed"] = a.seed;
        manifest.output("report", a.out);
        manifest.write(a.out + ".manifest.json");
    }
    return report.passed ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::size_t n = 2000, dev_n = 0, test_n = 0, min_len = 6, max_len = 14;
    std::uint64_t seed = 1;
    bool shift = false;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    Manifest manifest("synth");
    SyntheticSpec spec;
    spec.min_len = a.min_len;
    spec.max_len = a.max_len;
    spec.count = a.n;
    try {
        spec.validate();
    } catch (const PreconditionError& e) {
        throw UsageError(e.what());
    }
    const std::size_t dev_n = a.dev_n ? a.dev_n : std::max<std::size_t>(1, a.n / 4);
    const std::size_t test_n = a.test_n ? a.test_n : std::max<std::size_t>(1, a.n / 4);
    const auto splits = synthetic_splits(spec, a.seed, a.n, dev_n, test_n, a.shift);
    fs::create_directories(a.out);
    const std::pair<const char*, const Corpus*> files[] = {
        {"train.jsonl", &splits.train}, {"dev.jsonl", &splits.dev}, {"test.jsonl", &splits.test}};
    for (const auto& [name, c] : files) {
        std::ostringstream buf;
        write_corpus(buf, c->instances);
        write_text(fs::path(a.out) / name, buf.str());
        manifest.output(name, (fs::path(a.out) / name).string());
    }
    SyntheticSpec train_spec = spec, test_spec = a.shift ? spec.shifted_variant() : spec;
    train_spec.count = a.n;
    test_spec.count = test_n;
    SyntheticSpec dev_spec = spec;
    dev_spec.count = dev_n;
    manifest["seed"] = a.seed;
    manifest["shift"] = a.shift;
    manifest["spec"] = {{"train", to_json(train_spec)}, {"dev", to_json(dev_spec)}, {"test", to_json(test_spec)}};
    manifest.write(fs::path(a.out) / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------

struct SimilarityArgs {
    std::string ckpt, train, test, out;
    std::size_t sample_cap = 1000000, jobs = 1;
    std::uint64_t seed = 1;
};

template <class T>
int run_similarity(const SimilarityArgs& a) {
    Manifest manifest("analyze similarity");
    const Model<T> model = load_checkpoint<T>(a.ckpt);
    const Corpus left = load_corpus(a.train), right = load_corpus(a.test);
    const auto report = representation_similarity(model, left.instances, right.instances, a.sample_cap, a.seed, a.jobs);
    const std::string text = to_json(report).dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text(a.out, text);
        manifest["config"] = to_json(model.config);
        manifest["seed"] = a.seed;
        manifest["sample_cap"] = a.sample_cap;
        manifest.input("checkpoint", a.ckpt);
        manifest.input("train", a.train);
        manifest.input("test", a.test);
        manifest.output("report", a.out);
        manifest.write(a.out + ".manifest.json");
    }
    if (report.overall.excluded_left || report.overall.excluded_right)
        std::cerr << "warning: excluded " << report.overall.excluded_left << " train and "
                  << report.overall.excluded_right << " test zero-norm vectors\n";
    return 0;
}

struct SweepArgs {
    std::string corpus, dev, out, ratios;
    ModelFlags flags;
};

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad ratio '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("--ratios needs at least one value");
    for (double r : out)
        if (!(r > 0 && r <= 1)) throw UsageError("ratio " + item + " outside (0, 1]");
    return out;
}

template <class T>
int run_sweep(const SweepArgs& a) {
    const auto ratios = parse_ratios(a.ratios);
    const TrainConfig cfg = a.flags.resolve();
    Manifest manifest("analyze sweep");
    const Corpus corpus = load_corpus(a.corpus), dev = load_corpus(a.dev);
    const auto points = sample_complexity_sweep<T>(corpus, dev, cfg, ratios);
    const std::string csv = sweep_csv(points);
    if (a.out.empty()) {
        std::cout << csv;
        return 0;
    }
    fs::create_directories(a.out);
    json j = json::array();
    for (const auto& p : points) j.push_back({{"ratio", p.ratio}, {"size", p.size}, {"f1", p.f1}});
    write_text(fs::path(a.out) / "sweep.csv", csv);
    write_text(fs::path(a.out) / "sweep.json", j.dump(2) + "\n");
    manifest["config"] = to_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["ratios"] = ratios;
    manifest.input("corpus", a.corpus);
    manifest.input("dev", a.dev);
    manifest.output("csv", (fs::path(a.out) / "sweep.csv").string());
    manifest.output("json", (fs::path(a.out) / "sweep.json").string());
    manifest.write(fs::path(a.out) / "manifest.json");
    return 0;
}

template <template <class> class Run, class Args>
int by_precision(const std::string& precision, const Args& a) {
    return precision == "float32" ? Run<float>{}(a) : Run<double>{}(a);
}

template <class T> struct TrainRun { int operator()(const TrainArgs& a) { return run_train<T>(a); } };
template <class T> struct EvalRun { int operator()(const EvalArgs& a) { return run_eval<T>(a); } };
template <class T> struct SimilarityRun { int operator()(const SimilarityArgs& a) { return run_similarity<T>(a); } };
template <class T> struct SweepRun { int operator()(const SweepArgs& a) { return run_sweep<T>(a); } };

std::string checkpoint_precision(const std::string& path) {
    return load_checkpoint_manifest(path).at("precision").get<std::string>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relation extraction with dependency-predicting self-attention and control gating"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, log and manifest");
    train_cmd->add_option("--corpus", train_args.corpus, "training corpus (JSONL)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--dev", train_args.dev, "dev corpus for model selection")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    train_cmd->add_option("--embeddings", train_args.embeddings, "word2vec text file")->check(CLI::ExistingFile);
    train_args.flags.attach(train_cmd, true);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a corpus");
    eval_cmd->add_option("--ckpt", eval_args.ckpt)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--corpus", eval_args.corpus)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--domain", eval_args.domain, "only instances of this domain");
    eval_cmd->add_option("--out", eval_args.out, "report file (default stdout)");
    eval_cmd->add_option("--config", eval_args.config_file, "expected config; must match the checkpoint")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--jobs", eval_args.jobs)->check(CLI::PositiveNumber);

    GradcheckArgs gc_args;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
    gc_cmd->add_option("--tol", gc_args.tol)->check(CLI::PositiveNumber);
    gc_cmd->add_option("--step", gc_args.step)->check(CLI::PositiveNumber);
    gc_cmd->add_option("--ablation", gc_args.ablation);
    gc_cmd->add_option("--seed", gc_args.seed);
    gc_cmd->add_option("--out", gc_args.out, "JSON report file");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic train/dev/test corpora");
    synth_cmd->add_option("--n", synth_args.n, "training instances")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--dev-n", synth_args.dev_n, "dev instances (default n/4)");
    synth_cmd->add_option("--test-n", synth_args.test_n, "test instances (default n/4)");
    synth_cmd->add_option("--min-len", synth_args.min_len);
    synth_cmd->add_option("--max-len", synth_args.max_len);
    synth_cmd->add_option("--seed", synth_args.seed);
    synth_cmd->add_flag("--shift", synth_args.shift, "draw the test split from the shifted domain");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();

    auto* analyze_cmd = app.add_subcommand("analyze", "representation similarity or sample-complexity sweep");
    analyze_cmd->require_subcommand(1);
    SimilarityArgs sim_args;
    auto* sim_cmd = analyze_cmd->add_subcommand("similarity", "mean cosine between train and test aggregation vectors");
    sim_cmd->add_option("--ckpt", sim_args.ckpt)->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--train", sim_args.train)->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--test", sim_args.test)->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--sample-cap", sim_args.sample_cap)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim_args.seed);
    sim_cmd->add_option("--jobs", sim_args.jobs)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--out", sim_args.out, "report file (default stdout)");
    SweepArgs sweep_args;
    auto* sweep_cmd = analyze_cmd->add_subcommand("sweep", "dev F1 against training-set fraction");
    sweep_cmd->add_option("--corpus", sweep_args.corpus)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--dev", sweep_args.dev)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--ratios", sweep_args.ratios, "comma-separated fractions in (0, 1]")->required();
    sweep_cmd->add_option("--out", sweep_args.out, "output directory (default: CSV to stdout)");
    sweep_args.flags.attach(sweep_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return by_precision<TrainRun>(train_args.flags.precision, train_args);
        if (eval_cmd->parsed()) return by_precision<EvalRun>(checkpoint_precision(eval_args.ckpt), eval_args);
        if (gc_cmd->parsed()) return run_gradcheck(gc_args);
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (sim_cmd->parsed()) return by_precision<SimilarityRun>(checkpoint_precision(sim_args.ckpt), sim_args);
        if (sweep_cmd->parsed()) return by_precision<SweepRun>(sweep_args.flags.precision, sweep_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
