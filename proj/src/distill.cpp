#include "foundry/distill.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "foundry/rng.hpp"

namespace foundry {

TeacherModel TeacherModel::init(const TokenizerConfig& tc, const EncoderConfig& ec,
                                std::size_t classes, std::uint64_t seed) {
    if (tc.d != ec.d) throw ArgumentError("teacher: tokenizer and encoder dims differ");
    TeacherModel t;
    t.tok_config = tc;
    t.enc_config = ec;
    t.classes = classes;
    t.tok = TokenizerParams::init(tc, seed);
    t.enc = EncoderParams::init(ec, seed);
    auto rng = make_stream(seed, "teacher-head");
    t.head_w = t.params.add("head.w", trunc_normal_tensor(rng, 2 * tc.d, classes, 0.02));
    t.head_b = t.params.add("head.b", Tensor::zeros(1, classes));
    t.params.merge(t.tok.params, "");
    t.params.merge(t.enc.params, "enc.");
    return t;
}

ad::Var pool_features(ad::Tape& tape, const ad::Var& tokens) {
    return tape.concat_cols({tape.mean_rows(tokens), tape.max_rows(tokens)});
}

ad::Var teacher_encode(ad::Tape& tape, const TokenizedInput& ti, const TeacherModel& teacher) {
    return encode(tape, tape.add(ti.tokens, ti.pos_embed), teacher.enc);
}

ad::Var teacher_logits(ad::Tape& tape, const TokenizedInput& ti, const TeacherModel& teacher) {
    ad::Var pooled = pool_features(tape, teacher_encode(tape, ti, teacher));
    return tape.add_rowvec(tape.matmul(pooled, teacher.head_w), teacher.head_b);
}

double train_teacher(TeacherModel& teacher, const std::vector<PointCloud>& data,
                     std::size_t epochs, std::uint64_t seed) {
    teacher.params.set_trainable(true);
    AdamWConfig ac;
    AdamW opt(ac, teacher.params);
    auto shuffle_rng = make_stream(seed, "teacher-shuffle");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = 16;
    double last_epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += batch) {
            const std::size_t bn = std::min(batch, order.size() - b);
            teacher.params.zero_grads();
            for (std::size_t i = 0; i < bn; ++i) {
                const auto& cloud = data[order[b + i]];
                ad::Tape tape;
                TokenizedInput ti = tokenize(tape, cloud, teacher.tok);
                ad::Var logits = teacher_logits(tape, ti, teacher);
                ad::Var loss = tape.cross_entropy_mean(logits, {*cloud.label});
                tape.backward(loss, 1.0 / static_cast<double>(bn));
                epoch_loss += loss->value.scalar_value();
            }
            opt.step(1e-3);
        }
        last_epoch_loss = epoch_loss / static_cast<double>(data.size());
    }
    teacher.freeze();
    return last_epoch_loss;
}

std::vector<Example> prepare_examples(const TeacherModel& teacher,
                                      const std::vector<PointCloud>& clouds) {
    std::vector<Example> out;
    out.reserve(clouds.size());
    for (const auto& cloud : clouds) {
        ad::Tape tape;
        TokenizedInput ti = tokenize(tape, cloud, teacher.tok);
        ad::Var y = teacher_encode(tape, ti, teacher);
        ad::Var pooled = pool_features(tape, y);
        ad::Var logits = tape.add_rowvec(tape.matmul(pooled, teacher.head_w), teacher.head_b);
        ad::Var probs = tape.softmax_rows(logits);
        Example ex;
        ex.tokens = ti.tokens->value;
        ex.pos = ti.pos_embed->value;
        ex.target = y->value;
        ex.teacher_probs = probs->value;
        ex.label = cloud.label.value_or(0);
        out.push_back(std::move(ex));
    }
    return out;
}

FoundryModel FoundryModel::init(const FoundryConfig& cfg, const TeacherModel& teacher,
                                std::uint64_t seed) {
    FoundryModel m;
    m.config = cfg;
    DsoConfig dc;
    dc.s = cfg.s;
    dc.d = teacher.enc_config.d;
    dc.qkv_bias = cfg.qkv_bias;
    dc.soft_assign = cfg.soft_assign;
    dc.tau = cfg.tau;
    m.dso = DsoParams::init(dc, seed);
    m.student = teacher.enc.clone("", cfg.student_layers);
    m.student_enc_config = m.student.config;
    CauConfig cc;
    cc.d = dc.d;
    cc.output_ln = cfg.output_ln;
    m.cau = CauParams::init(cc, seed);
    m.trainable.merge(m.dso.params, "");
    m.trainable.merge(m.student.params, "student.");
    m.trainable.merge(m.cau.params, "");
    if (cfg.use_gate) {
        GateConfig gc;
        gc.d = dc.d;
        gc.hidden = cfg.gate_hidden;
        m.gate = GateParams::init(gc, seed);
        m.trainable.merge(m.gate.params, "");
    }
    m.trainable.set_trainable(true);
    return m;
}

StudentOutput student_forward(ad::Tape& tape, const Tensor& tokens, const Tensor& pos,
                              const FoundryModel& model, CamMode mode,
                              std::mt19937_64* noise_rng) {
    const auto& cfg = model.config;
    const std::size_t c = tokens.rows();
    const bool require_hard = !cfg.soft_assign;
    ad::Var t = tape.constant(tokens);
    ad::Var p = tape.constant(pos);
    StudentOutput out;

    if (!cfg.use_gate) {
        DsoOutput dso = dso_forward(tape, t, p, model.dso, mode, noise_rng);
        ad::Var enc = encode(tape, dso.supertokens, model.student);
        out.yhat = cau_forward(tape, t, dso.assign.cam, enc, model.cau, require_hard);
        return out;
    }

    out.probs = gate_probs(tape, t, model.gate);
    std::vector<std::size_t> fused, kept;
    double pi_sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double pi = out.probs->value.at(i, 0);
        pi_sum += pi;
        if (pi > cfg.gate_threshold)
            fused.push_back(i);
        else
            kept.push_back(i);
    }
    out.mean_pi = pi_sum / static_cast<double>(c);
    out.fused_ratio = static_cast<double>(fused.size()) / static_cast<double>(c);

    // Straight-through row scaling: forward multiplies by one, gradients reach
    // the gate through pi (fused rows) or 1 - pi (kept rows).
    auto ste_scale = [&](const ad::Var& rows, const std::vector<std::size_t>& idx, bool fuse_side) {
        ad::Var sel = tape.select_rows(out.probs, idx);
        if (!fuse_side) sel = tape.sub(tape.constant(Tensor::full(idx.size(), 1, 1.0)), sel);
        ad::Var factor = tape.straight_through(sel, Tensor::full(idx.size(), 1, 1.0));
        return tape.scale_rows(rows, factor);
    };

    ad::Var kept_out;
    if (!kept.empty()) {
        ad::Var kept_in = ste_scale(tape.add(tape.select_rows(t, kept), tape.select_rows(p, kept)),
                                    kept, false);
        if (fused.empty()) {
            ad::Var enc = encode(tape, kept_in, model.student);
            out.yhat = tape.place_rows(c, {{enc, kept}});
            return out;
        }
        ad::Var t_f = ste_scale(tape.select_rows(t, fused), fused, true);
        DsoOutput dso = dso_forward(tape, t_f, tape.select_rows(p, fused), model.dso, mode,
                                    noise_rng);
        ad::Var enc = encode(tape, tape.concat_rows({dso.supertokens, kept_in}), model.student);
        ad::Var s_out = tape.slice_rows(enc, 0, cfg.s);
        kept_out = tape.slice_rows(enc, cfg.s, kept.size());
        ad::Var fused_out = cau_forward(tape, tape.select_rows(t, fused), dso.assign.cam, s_out,
                                        model.cau, require_hard);
        out.yhat = tape.place_rows(c, {{fused_out, fused}, {kept_out, kept}});
        return out;
    }

    ad::Var t_f = ste_scale(t, fused, true);
    DsoOutput dso = dso_forward(tape, t_f, p, model.dso, mode, noise_rng);
    ad::Var enc = encode(tape, dso.supertokens, model.student);
    out.yhat = cau_forward(tape, t, dso.assign.cam, enc, model.cau, require_hard);
    return out;
}

namespace {

std::vector<EpochRow> run_distill(FoundryModel& model, const TeacherModel* teacher,
                                  const std::vector<Example>& examples, const TrainConfig& cfg) {
    if (examples.empty()) throw ArgumentError("distill: empty example set");
    AdamW opt(cfg.adamw, model.trainable);
    opt.exempt_from_decay("gate.");
    auto shuffle_rng = make_stream(cfg.seed, "distill-shuffle");
    auto noise_rng = make_stream(cfg.seed, "distill-gumbel");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochRow> rows;
    rows.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        model.trainable.set_trainable(true);
        if (epoch < cfg.unfreeze_epoch) model.student.params.set_trainable(false);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cfg.lr.at(epoch);

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t bn = std::min(cfg.batch_size, order.size() - b);
            model.trainable.zero_grads();
            for (std::size_t i = 0; i < bn; ++i) {
                const Example& ex = examples[order[b + i]];
                ad::Tape tape;
                StudentOutput so =
                    student_forward(tape, ex.tokens, ex.pos, model, CamMode::Train, &noise_rng);
                ad::Var loss;
                if (teacher) {
                    ad::Var pooled = pool_features(tape, so.yhat);
                    ad::Var logits =
                        tape.add_rowvec(tape.matmul(pooled, teacher->head_w), teacher->head_b);
                    loss = tape.kl_to_teacher_mean(logits, ex.teacher_probs);
                } else {
                    loss = tape.smooth_l1(so.yhat, tape.constant(ex.target));
                }
                ad::Var total = loss;
                if (model.config.use_gate && model.config.lambda_gate > 0.0) {
                    ad::Var reg = gate_regularizer(tape, so.probs, model.config.lambda_gate);
                    total = tape.add(loss, reg);
                    row.gate_term += reg->value.scalar_value();
                }
                tape.backward(total, 1.0 / static_cast<double>(bn));
                row.loss += loss->value.scalar_value();
                row.mean_pi += so.mean_pi;
                row.fused_ratio += so.fused_ratio;
            }
            opt.step(lr);
        }
        const double inv_n = 1.0 / static_cast<double>(examples.size());
        row.loss *= inv_n;
        row.gate_term *= inv_n;
        row.mean_pi *= inv_n;
        row.fused_ratio *= inv_n;
        rows.push_back(row);
    }
    model.trainable.set_trainable(true);
    return rows;
}

}  // namespace

std::vector<EpochRow> distill(FoundryModel& model, const std::vector<Example>& examples,
                              const TrainConfig& cfg) {
    return run_distill(model, nullptr, examples, cfg);
}

std::vector<EpochRow> distill_specialist(FoundryModel& model, const TeacherModel& teacher,
                                         const std::vector<Example>& examples,
                                         const TrainConfig& cfg) {
    return run_distill(model, &teacher, examples, cfg);
}

void write_epoch_csv(const std::string& path, const std::vector<EpochRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "epoch,loss,gate_term,mean_pi,fused_ratio,lr\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss,
                      r.gate_term, r.mean_pi, r.fused_ratio, r.lr);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

Tensor student_features(const FoundryModel& model, const Example& ex) {
    ad::Tape tape;
    StudentOutput so = student_forward(tape, ex.tokens, ex.pos, model, CamMode::Eval);
    return so.yhat->value;
}

Tensor pool_tensor(const Tensor& tokens) {
    const std::size_t n = tokens.rows(), d = tokens.cols();
    if (n == 0) throw ArgumentError("pool_tensor: empty input");
    Tensor out = Tensor::zeros(1, 2 * d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0, mx = tokens.at(0, j);
        for (std::size_t i = 0; i < n; ++i) {
            sum += tokens.at(i, j);
            mx = std::max(mx, tokens.at(i, j));
        }
        out.at(0, j) = sum / static_cast<double>(n);
        out.at(0, d + j) = mx;
    }
    return out;
}

ProbeResult linear_probe(const std::vector<Tensor>& train_feats,
                         const std::vector<std::size_t>& train_labels,
                         const std::vector<Tensor>& test_feats,
                         const std::vector<std::size_t>& test_labels, std::size_t classes,
                         std::size_t epochs, std::uint64_t seed) {
    if (train_feats.empty() || train_feats.size() != train_labels.size() ||
        test_feats.size() != test_labels.size())
        throw ArgumentError("linear_probe: inconsistent feature/label sizes");
    const std::size_t dim = train_feats[0].cols();
    auto stack = [dim](const std::vector<Tensor>& feats) {
        Tensor x({feats.size(), dim});
        for (std::size_t i = 0; i < feats.size(); ++i) {
            if (feats[i].rows() != 1 || feats[i].cols() != dim)
                throw DimensionError("linear_probe: features must share one row shape");
            for (std::size_t j = 0; j < dim; ++j) x.at(i, j) = feats[i].at(0, j);
        }
        return x;
    };
    const Tensor xtr = stack(train_feats);
    auto rng = make_stream(seed, "probe-init");
    ad::Var w = ad::make_leaf(trunc_normal_tensor(rng, dim, classes, 0.02), true);
    ad::Var b = ad::make_leaf(Tensor::zeros(1, classes), true);
    ParamSet ps;
    ps.items.emplace_back("probe.w", w);
    ps.items.emplace_back("probe.b", b);
    AdamWConfig ac;
    ac.weight_decay = 0.0;
    AdamW opt(ac, ps);
    for (std::size_t e = 0; e < epochs; ++e) {
        ps.zero_grads();
        ad::Tape tape;
        ad::Var logits = tape.add_rowvec(tape.matmul(tape.constant(xtr), w), b);
        ad::Var loss = tape.cross_entropy_mean(logits, train_labels);
        tape.backward(loss);
        opt.step(1e-2);
    }
    auto accuracy = [&](const std::vector<Tensor>& feats, const std::vector<std::size_t>& labels) {
        if (feats.empty()) return 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < feats.size(); ++i) {
            std::size_t best = 0;
            double best_v = -1e300;
            for (std::size_t cl = 0; cl < classes; ++cl) {
                double v = b->value.at(0, cl);
                for (std::size_t j = 0; j < dim; ++j)
                    v += feats[i].at(0, j) * w->value.at(j, cl);
                if (v > best_v) {
                    best_v = v;
                    best = cl;
                }
            }
            if (best == labels[i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(feats.size());
    };
    ProbeResult pr;
    pr.train_acc = accuracy(train_feats, train_labels);
    pr.test_acc = accuracy(test_feats, test_labels);
    return pr;
}

}  // namespace foundry
