// foundry: dataset generation, distillation, probing, baselines, budget-gated
// inference, cost analysis, and the self-verification suite in one binary.
//
// Every run writes <out>/manifest.txt with its fully resolved configuration;
// `foundry replay <manifest>` reproduces the artifacts bit for bit.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "foundry/baselines.hpp"
#include "foundry/checkpoint.hpp"
#include "foundry/config.hpp"
#include "foundry/cost.hpp"
#include "foundry/data.hpp"
#include "foundry/distill.hpp"
#include "foundry/rng.hpp"
#include "foundry/verify.hpp"

namespace {

using namespace foundry;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

void write_text(const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<PointCloud> dataset_for(const Manifest& m) {
    if (m.has("data")) return load_dataset(m.get("data"));
    const std::uint64_t seed = m.get_u64("seed");
    const std::size_t n = m.get_u64_or("n", 512);
    const std::size_t points = m.get_u64_or("points", 64);
    if (m.get_or("task", "class") == "count") return make_count_dataset(seed, n, points);
    return make_class_dataset(seed, n, points);
}

TokenizerConfig tokenizer_config(const Manifest& m) {
    TokenizerConfig tc;
    tc.c = m.get_u64_or("tok.c", 16);
    tc.k = m.get_u64_or("tok.k", 8);
    tc.d = m.get_u64_or("tok.d", 32);
    return tc;
}

EncoderConfig teacher_config(const Manifest& m) {
    EncoderConfig ec;
    ec.layers = m.get_u64_or("teacher.layers", 4);
    ec.d = m.get_u64_or("tok.d", 32);
    ec.heads = m.get_u64_or("teacher.heads", 4);
    return ec;
}

FoundryConfig foundry_config(const Manifest& m) {
    FoundryConfig fc;
    fc.s = m.get_u64_or("supertokens", 4);
    fc.student_layers = m.get_u64_or("student.layers", 2);
    fc.qkv_bias = m.get_u64_or("qkv_bias", 0) != 0;
    fc.soft_assign = m.get_u64_or("soft_assign", 0) != 0;
    fc.tau = m.get_f64_or("tau", 1.0);
    fc.output_ln = m.get_u64_or("output_ln", 0) != 0;
    fc.use_gate = m.get_u64_or("gate", 0) != 0;
    fc.gate_hidden = m.get_u64_or("gate.hidden", 128);
    fc.gate_threshold = m.get_f64_or("threshold", 0.5);
    fc.lambda_gate = m.get_f64_or("lambda_gate", 0.0);
    return fc;
}

TrainConfig train_config(const Manifest& m) {
    TrainConfig cfg;
    cfg.epochs = m.get_u64_or("epochs", 30);
    cfg.batch_size = m.get_u64_or("batch", 16);
    cfg.unfreeze_epoch = m.get_u64_or("unfreeze_epoch", 0);
    cfg.seed = m.get_u64("seed");
    cfg.lr.start_lr = m.get_f64_or("lr.start", 1e-6);
    cfg.lr.peak_lr = m.get_f64_or("lr.peak", 1e-3);
    cfg.lr.final_lr = m.get_f64_or("lr.final", 1e-6);
    cfg.lr.warmup_epochs = m.get_u64_or("lr.warmup", std::max<std::size_t>(1, cfg.epochs / 2));
    cfg.lr.total_epochs = cfg.epochs;
    return cfg;
}

/// Teacher from checkpoint when given, otherwise trained in place on the data.
TeacherModel make_teacher(const Manifest& m, const std::vector<PointCloud>& data,
                          std::size_t classes) {
    TeacherModel teacher =
        TeacherModel::init(tokenizer_config(m), teacher_config(m), classes, m.get_u64("seed"));
    if (m.has("teacher_ckpt")) {
        load_params(m.get("teacher_ckpt"), teacher.params);
        teacher.freeze();
    } else {
        train_teacher(teacher, data, m.get_u64_or("teacher.epochs", 3), m.get_u64("seed"));
    }
    return teacher;
}

std::size_t task_classes(const Manifest& m) {
    return m.get_or("task", "class") == "count" ? kNumCountClasses : kNumShapeClasses;
}

void write_gate_decisions(const std::string& path, const FoundryModel& model,
                          const Example& ex, std::size_t budget) {
    ad::Tape tape;
    ad::Var probs = gate_probs(tape, tape.constant(ex.tokens), model.gate);
    BudgetDecision dec = budget_select(probs->value, budget, model.config.s);
    std::vector<bool> fused(ex.tokens.rows(), false);
    for (std::size_t i : dec.fused) fused[i] = true;
    std::string csv = "index,pi,fused\n";
    for (std::size_t i = 0; i < ex.tokens.rows(); ++i)
        csv += std::to_string(i) + "," + fmt(probs->value.at(i, 0)) + "," +
               (fused[i] ? "1" : "0") + "\n";
    write_text(path, csv);
}

int run_gen_data(const Manifest& m, const std::string& out) {
    auto data = dataset_for(m);
    save_dataset(out + "/dataset.ften", data);
    std::printf("wrote %zu clouds to %s/dataset.ften\n", data.size(), out.c_str());
    return kExitOk;
}

int run_distill(const Manifest& m, const std::string& out) {
    auto data = dataset_for(m);
    TeacherModel teacher = make_teacher(m, data, task_classes(m));
    save_params(out + "/teacher.ckpt", teacher.params);
    auto examples = prepare_examples(teacher, data);

    FoundryModel model = FoundryModel::init(foundry_config(m), teacher, m.get_u64("seed"));
    if (m.has("student_ckpt")) load_params(m.get("student_ckpt"), model.trainable);

    TrainConfig cfg = train_config(m);
    std::vector<EpochRow> rows = m.get_or("loss", "fmd") == "specialist"
                                     ? distill_specialist(model, teacher, examples, cfg)
                                     : distill(model, examples, cfg);
    write_epoch_csv(out + "/epochs.csv", rows);
    save_params(out + "/student.ckpt", model.trainable);

    if (model.config.use_gate && !examples.empty()) {
        const std::size_t budget =
            m.get_u64_or("token_budget", tokenizer_config(m).c);
        write_gate_decisions(out + "/gate_decisions.csv", model, examples.front(), budget);
    }
    std::printf("final loss %.6g over %zu epochs\n", rows.empty() ? 0.0 : rows.back().loss,
                rows.size());
    return kExitOk;
}

/// Rebuild the models a distill run trained, from its manifest + checkpoints.
struct RestoredRun {
    TeacherModel teacher;
    FoundryModel model;
};

RestoredRun restore_run(const std::string& run_dir) {
    Manifest rm = Manifest::load(run_dir + "/manifest.txt");
    TeacherModel teacher = TeacherModel::init(tokenizer_config(rm), teacher_config(rm),
                                              task_classes(rm), rm.get_u64("seed"));
    load_params(run_dir + "/teacher.ckpt", teacher.params);
    teacher.freeze();
    FoundryModel model = FoundryModel::init(foundry_config(rm), teacher, rm.get_u64("seed"));
    load_params(run_dir + "/student.ckpt", model.trainable);
    model.trainable.set_trainable(false);
    return RestoredRun{std::move(teacher), std::move(model)};
}

/// Deterministic 80/20 split of pooled per-cloud features, then a linear
/// probe on top.
ProbeResult probe_features(const std::vector<Tensor>& feats,
                           const std::vector<std::size_t>& labels, std::size_t classes,
                           std::uint64_t seed) {
    std::vector<std::size_t> order(feats.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_stream(seed, "probe-shuffle");
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t test = std::max<std::size_t>(1, feats.size() / 5);
    std::vector<Tensor> train_f, test_f;
    std::vector<std::size_t> train_l, test_l;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < test) {
            test_f.push_back(feats[order[i]]);
            test_l.push_back(labels[order[i]]);
        } else {
            train_f.push_back(feats[order[i]]);
            train_l.push_back(labels[order[i]]);
        }
    }
    return linear_probe(train_f, train_l, test_f, test_l, classes, 200, seed);
}

int run_probe(const Manifest& m, const std::string& out) {
    RestoredRun run = restore_run(m.get("run"));
    auto data = dataset_for(m);
    auto examples = prepare_examples(run.teacher, data);
    std::vector<Tensor> feats;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        feats.push_back(pool_tensor(student_features(run.model, examples[i])));
        labels.push_back(examples[i].label);
    }
    ProbeResult res = probe_features(feats, labels, task_classes(m), m.get_u64("seed"));
    write_text(out + "/probe.csv",
               "train_acc,test_acc\n" + fmt(res.train_acc) + "," + fmt(res.test_acc) + "\n");
    std::printf("probe accuracy train %.4f test %.4f\n", res.train_acc, res.test_acc);
    return kExitOk;
}

int run_baseline(const Manifest& m, const std::string& out) {
    const std::string kind = m.get("kind");
    auto data = dataset_for(m);
    const std::size_t classes = task_classes(m);
    TeacherModel teacher = make_teacher(m, data, classes);
    auto examples = prepare_examples(teacher, data);
    const std::size_t s = m.get_u64_or("supertokens", 4);
    const std::uint64_t seed = m.get_u64("seed");

    std::vector<Tensor> feats;
    std::vector<std::size_t> labels;
    for (const auto& ex : examples) labels.push_back(ex.label);

    if (kind == "kmeans") {
        KMeansCodebook cb = kmeans_codebook(teacher, examples, s, seed);
        for (const auto& ex : examples)
            feats.push_back(pool_tensor(kmeans_student_features(cb, ex)));
    } else if (kind == "random") {
        auto rng = make_stream(seed, "random-inference");
        for (const auto& ex : examples) {
            auto idx = random_sample_inference(rng, ex.target.rows(), s);
            Tensor subset({idx.size(), ex.target.cols()});
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t c = 0; c < ex.target.cols(); ++c)
                    subset.at(r, c) = ex.target.at(idx[r], c);
            feats.push_back(pool_tensor(subset));
        }
    } else if (kind == "groupsize") {
        for (const auto& cloud : data) {
            ad::Tape tape;
            TokenizedInput ti = groupsize_inference(tape, cloud, teacher.tok, s);
            feats.push_back(pool_tensor(teacher_encode(tape, ti, teacher)->value));
        }
    } else if (kind == "fps") {
        FpsStudent student = FpsStudent::init(teacher.tok_config, s, seed);
        std::vector<FpsExample> fex;
        for (std::size_t i = 0; i < data.size(); ++i)
            fex.push_back(FpsExample{data[i], examples[i].target});
        train_fps_student(student, teacher, fex, train_config(m));
        for (const auto& cloud : data)
            feats.push_back(pool_tensor(fps_student_features(student, teacher, cloud)));
    } else if (kind == "specialist") {
        FoundryModel model = FoundryModel::init(foundry_config(m), teacher, seed);
        distill_specialist(model, teacher, examples, train_config(m));
        for (const auto& ex : examples)
            feats.push_back(pool_tensor(student_features(model, ex)));
    } else {
        throw ArgumentError("unknown baseline kind: " + kind);
    }

    ProbeResult res = probe_features(feats, labels, classes, seed);
    write_text(out + "/baseline.csv", "kind,train_acc,test_acc\n" + kind + "," +
                                          fmt(res.train_acc) + "," + fmt(res.test_acc) + "\n");
    std::printf("%s probe accuracy train %.4f test %.4f\n", kind.c_str(), res.train_acc,
                res.test_acc);
    return kExitOk;
}

struct SweepSpec {
    std::string param;
    std::uint64_t lo = 0, hi = 0;
};

SweepSpec parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    const auto dots = text.find("..");
    if (eq == std::string::npos || dots == std::string::npos || dots < eq)
        throw ArgumentError("sweep must look like s=1..16: " + text);
    SweepSpec spec;
    spec.param = text.substr(0, eq);
    spec.lo = std::stoull(text.substr(eq + 1, dots - eq - 1));
    spec.hi = std::stoull(text.substr(dots + 2));
    if (spec.hi < spec.lo) throw ArgumentError("empty sweep range: " + text);
    return spec;
}

int run_cost(const Manifest& m, const std::string& out) {
    SweepSpec spec = parse_sweep(m.get("sweep"));
    std::uint64_t s = m.get_u64_or("supertokens", 16);
    std::uint64_t n = m.get_u64_or("n", 64);
    std::uint64_t d = m.get_u64_or("d", 384);
    std::uint64_t layers = m.get_u64_or("layers", 12);
    std::uint64_t heads = m.get_u64_or("heads", 6);
    std::uint64_t hidden = m.get_u64_or("gate.hidden", 128);
    std::uint64_t r = m.get_u64_or("fused", 0);
    const std::string component = m.get_or("component", "foundry");

    std::string csv = "s,n,d,layers,heads,hidden,fused,component,flops\n";
    for (std::uint64_t v = spec.lo; v <= spec.hi; ++v) {
        std::uint64_t* slot = nullptr;
        if (spec.param == "s") slot = &s;
        else if (spec.param == "n") slot = &n;
        else if (spec.param == "d") slot = &d;
        else if (spec.param == "layers") slot = &layers;
        else if (spec.param == "heads") slot = &heads;
        else if (spec.param == "fused") slot = &r;
        else throw ArgumentError("unknown sweep parameter: " + spec.param);
        *slot = v;

        std::uint64_t flops = 0;
        if (component == "transformer") flops = cost::transformer_flops(layers, n, d);
        else if (component == "dso") flops = cost::dso_flops(s, n, d);
        else if (component == "cau") flops = cost::cau_flops(s, n, d, heads);
        else if (component == "gate") flops = cost::gate_flops(n, d, hidden);
        else if (component == "foundry") flops = cost::foundry_flops(s, n, d, heads, layers);
        else if (component == "foundry_gate")
            flops = cost::foundry_gate_flops(s, n, r, d, heads, layers, hidden);
        else throw ArgumentError("unknown component: " + component);

        csv += std::to_string(s) + "," + std::to_string(n) + "," + std::to_string(d) + "," +
               std::to_string(layers) + "," + std::to_string(heads) + "," +
               std::to_string(hidden) + "," + std::to_string(r) + "," + component + "," +
               std::to_string(flops) + "\n";
    }
    const std::string path = m.get_or("report", out + "/report.csv");
    write_text(path, csv);
    std::printf("wrote %llu rows to %s\n",
                static_cast<unsigned long long>(spec.hi - spec.lo + 1), path.c_str());
    return kExitOk;
}

int run_command(const Manifest& m, const std::string& out) {
    std::filesystem::create_directories(out);
    m.save(out + "/manifest.txt");
    const std::string cmd = m.get("command");
    if (cmd == "gen-data") return run_gen_data(m, out);
    if (cmd == "distill") return run_distill(m, out);
    if (cmd == "probe") return run_probe(m, out);
    if (cmd == "baseline") return run_baseline(m, out);
    if (cmd == "cost") return run_cost(m, out);
    throw ArgumentError("unknown command in manifest: " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foundry: supertoken distillation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out = "run", data_path, teacher_ckpt, student_ckpt;
    std::string task = "class", loss = "fmd", kind, sweep, component = "foundry", replay_path;
    std::uint64_t seed = 1;
    std::size_t n = 512, points = 64, supertokens = 4, epochs = 30, unfreeze = 0, budget = 0;
    double threshold = 0.5, lambda_gate = 0.0;
    bool gate = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out, "output directory");
    };
    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--data", data_path, "dataset file (generated when absent)");
        sub->add_option("--n", n, "number of clouds");
        sub->add_option("--points", points, "points per cloud");
        sub->add_option("--task", task, "class or count")
            ->check(CLI::IsMember({"class", "count"}));
    };
    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--supertokens", supertokens, "supertoken count s");
        sub->add_option("--threshold", threshold, "gate fuse threshold");
        sub->add_option("--token-budget", budget, "encoder input budget B");
        sub->add_option("--lambda-gate", lambda_gate, "gate regularizer weight");
        sub->add_option("--unfreeze-epoch", unfreeze, "epoch from which the student trains");
        sub->add_option("--teacher-ckpt", teacher_ckpt, "teacher checkpoint to load");
        sub->add_option("--student-ckpt", student_ckpt, "student checkpoint to load");
        sub->add_option("--epochs", epochs, "distillation epochs");
        sub->add_flag("--gate", gate, "enable the budget gate");
    };

    CLI::App* c_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(c_gen);
    add_data(c_gen);

    CLI::App* c_distill = app.add_subcommand("distill", "distill a student from a teacher");
    add_common(c_distill);
    add_data(c_distill);
    add_model(c_distill);
    c_distill->add_option("--loss", loss, "fmd or specialist")
        ->check(CLI::IsMember({"fmd", "specialist"}));

    std::string run_dir;
    CLI::App* c_probe = app.add_subcommand("probe", "linear-probe a distilled student");
    add_common(c_probe);
    add_data(c_probe);
    c_probe->add_option("--run", run_dir, "distill output directory")->required();

    CLI::App* c_base = app.add_subcommand("baseline", "train and probe a baseline");
    add_common(c_base);
    add_data(c_base);
    add_model(c_base);
    c_base->add_option("--kind", kind, "baseline family")
        ->required()
        ->check(CLI::IsMember({"kmeans", "random", "groupsize", "fps", "specialist"}));

    CLI::App* c_cost = app.add_subcommand("cost", "analytical FLOPs sweep");
    add_common(c_cost);
    c_cost->add_option("--sweep", sweep, "parameter range, e.g. s=1..16")->required();
    c_cost->add_option("--component", component, "formula to evaluate");
    c_cost->add_option("--supertokens", supertokens, "supertoken count s");
    c_cost->add_option("--n", n, "token count");

    CLI::App* c_verify = app.add_subcommand("verify", "run the invariant suite");

    CLI::App* c_replay = app.add_subcommand("replay", "re-run a command from its manifest");
    c_replay->add_option("manifest", replay_path, "manifest file")->required();
    c_replay->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_verify->parsed()) {
            const int failures = run_verification();
            if (failures) {
                std::fprintf(stderr, "verification failed: %d checks\n", failures);
                return kExitNumeric;
            }
            std::printf("all checks passed\n");
            return kExitOk;
        }
        if (c_replay->parsed()) return run_command(Manifest::load(replay_path), out);

        Manifest m;
        if (!config_path.empty()) m = Manifest::load(config_path);
        m.set_u64("seed", seed);
        auto keep = [&](CLI::App* sub, const std::string& flag, auto setter) {
            if (sub->count(flag)) setter();
        };
        if (c_gen->parsed() || c_distill->parsed() || c_probe->parsed() || c_base->parsed()) {
            CLI::App* sub = c_gen->parsed()    ? c_gen
                            : c_distill->parsed() ? c_distill
                            : c_probe->parsed()   ? c_probe
                                                  : c_base;
            keep(sub, "--data", [&] { m.set("data", data_path); });
            keep(sub, "--n", [&] { m.set_u64("n", n); });
            keep(sub, "--points", [&] { m.set_u64("points", points); });
            keep(sub, "--task", [&] { m.set("task", task); });
        }
        if (c_distill->parsed() || c_base->parsed()) {
            CLI::App* sub = c_distill->parsed() ? c_distill : c_base;
            keep(sub, "--supertokens", [&] { m.set_u64("supertokens", supertokens); });
            keep(sub, "--threshold", [&] { m.set_f64("threshold", threshold); });
            keep(sub, "--token-budget", [&] { m.set_u64("token_budget", budget); });
            keep(sub, "--lambda-gate", [&] { m.set_f64("lambda_gate", lambda_gate); });
            keep(sub, "--unfreeze-epoch", [&] { m.set_u64("unfreeze_epoch", unfreeze); });
            keep(sub, "--teacher-ckpt", [&] { m.set("teacher_ckpt", teacher_ckpt); });
            keep(sub, "--student-ckpt", [&] { m.set("student_ckpt", student_ckpt); });
            keep(sub, "--epochs", [&] { m.set_u64("epochs", epochs); });
            if (gate || lambda_gate > 0.0 || budget > 0 || sub->count("--threshold"))
                m.set_u64("gate", 1);
        }
        if (c_gen->parsed()) m.set("command", "gen-data");
        if (c_distill->parsed()) {
            m.set("command", "distill");
            keep(c_distill, "--loss", [&] { m.set("loss", loss); });
        }
        if (c_probe->parsed()) {
            m.set("command", "probe");
            m.set("run", run_dir);
        }
        if (c_base->parsed()) {
            m.set("command", "baseline");
            m.set("kind", kind);
        }
        if (c_cost->parsed()) {
            m.set("command", "cost");
            m.set("sweep", sweep);
            keep(c_cost, "--component", [&] { m.set("component", component); });
            keep(c_cost, "--supertokens", [&] { m.set_u64("supertokens", supertokens); });
            keep(c_cost, "--n", [&] { m.set_u64("n", n); });
            // `cost --out report.csv` names the report file directly; the
            // manifest goes next to it.
            if (out.ends_with(".csv")) {
                m.set("report", out);
                const std::string parent = std::filesystem::path(out).parent_path().string();
                out = parent.empty() ? "." : parent;
            }
        }
        return run_command(m, out);
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "contract violation: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
