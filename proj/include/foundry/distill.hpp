#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "foundry/cau.hpp"
#include "foundry/data.hpp"
#include "foundry/dso.hpp"
#include "foundry/encoder.hpp"
#include "foundry/gate.hpp"
#include "foundry/optim.hpp"
#include "foundry/tokenizer.hpp"

namespace foundry {

/// Tokenizer + encoder + linear classifier head over pooled features.
/// Trained briefly on synthetic shapes, then frozen as the teacher.
struct TeacherModel {
    TokenizerConfig tok_config;
    EncoderConfig enc_config;
    std::size_t classes = kNumShapeClasses;
    TokenizerParams tok;
    EncoderParams enc;
    ad::Var head_w, head_b;  // 2d x classes
    ParamSet params;

    static TeacherModel init(const TokenizerConfig& tc, const EncoderConfig& ec,
                             std::size_t classes, std::uint64_t seed);
    void freeze() { params.set_trainable(false); }
};

/// concat(mean, max) over token rows, 1 x 2d.
ad::Var pool_features(ad::Tape& tape, const ad::Var& tokens);

/// Teacher token field: Enc_T(tokens + positions).
ad::Var teacher_encode(ad::Tape& tape, const TokenizedInput& ti, const TeacherModel& teacher);

ad::Var teacher_logits(ad::Tape& tape, const TokenizedInput& ti, const TeacherModel& teacher);

/// Cross-entropy training of the whole teacher stack. Returns final-epoch
/// mean loss.
double train_teacher(TeacherModel& teacher, const std::vector<PointCloud>& data,
                     std::size_t epochs, std::uint64_t seed);

/// Everything the student needs per cloud, precomputed under the frozen
/// teacher so distillation epochs replay cheap constants.
struct Example {
    Tensor tokens;         // c x d content tokens
    Tensor pos;            // c x d positional embeddings
    Tensor target;         // c x d teacher token field
    Tensor teacher_probs;  // 1 x classes, softmaxed head output
    std::size_t label = 0;
};

std::vector<Example> prepare_examples(const TeacherModel& teacher,
                                      const std::vector<PointCloud>& clouds);

struct FoundryConfig {
    std::size_t s = 4;
    std::size_t student_layers = 2;
    bool qkv_bias = false;
    bool soft_assign = false;
    double tau = 1.0;
    bool output_ln = false;
    bool use_gate = false;
    std::size_t gate_hidden = 128;
    double gate_threshold = 0.5;
    double lambda_gate = 0.0;
};

/// Student stack: compression, a shallower encoder initialized from the
/// teacher's first layers, reconstruction, and an optional budget gate.
struct FoundryModel {
    FoundryConfig config;
    EncoderConfig student_enc_config;
    DsoParams dso;
    EncoderParams student;
    CauParams cau;
    GateParams gate;  // registered only when use_gate
    ParamSet trainable;

    static FoundryModel init(const FoundryConfig& cfg, const TeacherModel& teacher,
                             std::uint64_t seed);
};

struct StudentOutput {
    ad::Var yhat;    // c x d reconstruction
    ad::Var probs;   // c x 1 gate probabilities, null without the gate
    double mean_pi = 0.0;
    double fused_ratio = 1.0;  // fraction of tokens routed through supertokens
};

/// One student pass over precomputed teacher tokens. `noise_rng` feeds the
/// Gumbel perturbation in Train mode.
StudentOutput student_forward(ad::Tape& tape, const Tensor& tokens, const Tensor& pos,
                              const FoundryModel& model, CamMode mode,
                              std::mt19937_64* noise_rng = nullptr);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    LrSchedule lr{1e-6, 1e-3, 1e-6, 15, 30};
    AdamWConfig adamw;
    std::size_t unfreeze_epoch = 0;  // student encoder trains from this epoch on
    std::uint64_t seed = 1;
};

struct EpochRow {
    std::size_t epoch = 0;
    double loss = 0.0;       // reconstruction (or mimicry) term
    double gate_term = 0.0;  // -lambda * sum(pi), averaged per cloud
    double mean_pi = 0.0;
    double fused_ratio = 0.0;
    double lr = 0.0;
};

/// Token-field distillation: SmoothL1(yhat, teacher tokens) plus the gate
/// regularizer when enabled.
std::vector<EpochRow> distill(FoundryModel& model, const std::vector<Example>& examples,
                              const TrainConfig& cfg);

/// Specialist distillation: KL between the frozen teacher head applied to the
/// student reconstruction and the teacher's own class distribution.
std::vector<EpochRow> distill_specialist(FoundryModel& model, const TeacherModel& teacher,
                                         const std::vector<Example>& examples,
                                         const TrainConfig& cfg);

void write_epoch_csv(const std::string& path, const std::vector<EpochRow>& rows);

/// Student reconstruction values for probing (Eval mode, no tape reuse).
Tensor student_features(const FoundryModel& model, const Example& ex);

struct ProbeResult {
    double train_acc = 0.0;
    double test_acc = 0.0;
};

/// Linear softmax classifier on pooled per-cloud features (each 1 x 2d),
/// trained with AdamW, full batch.
ProbeResult linear_probe(const std::vector<Tensor>& train_feats,
                         const std::vector<std::size_t>& train_labels,
                         const std::vector<Tensor>& test_feats,
                         const std::vector<std::size_t>& test_labels, std::size_t classes,
                         std::size_t epochs, std::uint64_t seed);

/// Pooled (1 x 2d) version of a c x d token field, plain tensor math.
Tensor pool_tensor(const Tensor& tokens);

}  // namespace foundry
