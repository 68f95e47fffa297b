#pragma once

#include <cstdint>
#include <vector>

#include "foundry/distill.hpp"

namespace foundry {

struct KMeansResult {
    Tensor centroids;                 // k x d
    std::vector<std::size_t> assign;  // n, cluster index per row
    std::size_t iters = 0;
};

/// Lloyd's algorithm on rows. Initial centroids are k distinct random rows;
/// a cluster that empties is reseeded from the point farthest from its
/// centroid. Stops when assignments stabilize or at `max_iters`.
KMeansResult kmeans_fit(const Tensor& rows, std::size_t k, std::uint64_t seed,
                        std::size_t max_iters = 100);

/// Static-clustering student: a global codebook of k prototypes fitted over
/// the tokenizer outputs of the whole training set, each prototype encoded
/// once by the frozen teacher encoder.
struct KMeansCodebook {
    Tensor centroids;  // k x d, token space
    Tensor encoded;    // k x d, teacher-encoded prototypes
};

KMeansCodebook kmeans_codebook(const TeacherModel& teacher, const std::vector<Example>& examples,
                               std::size_t k, std::uint64_t seed);

/// Every token retrieves its nearest prototype's encoded row.
Tensor kmeans_student_features(const KMeansCodebook& codebook, const Example& ex);

/// Order-preserving random subset of k indices from [0, n).
std::vector<std::size_t> random_sample_inference(std::mt19937_64& rng, std::size_t n,
                                                 std::size_t k);

/// Re-tokenize with fewer centers and proportionally larger groups:
/// k = floor(2p / c_new), clamped to the point count.
TokenizedInput groupsize_inference(ad::Tape& tape, const PointCloud& cloud,
                                   const TokenizerParams& params, std::size_t c_new);

/// Sparse-tokenizer student: its own tokenizer over s FPS centers feeds the
/// frozen teacher encoder; a 3-NN inverse-distance upsampler over center
/// coordinates lifts the s outputs back to c token rows.
struct FpsStudent {
    TokenizerConfig sparse_config;  // c = s
    TokenizerParams tok;
    ParamSet trainable;

    static FpsStudent init(const TokenizerConfig& dense, std::size_t s, std::uint64_t seed);
};

/// Row-stochastic c x s interpolation weights: for each dense center, its 3
/// nearest sparse centers weighted by 1 / (dist + 1e-8), normalized.
Tensor knn_upsample_weights(const Tensor& dense_xyz, const Tensor& sparse_xyz);

/// Reconstruction for one cloud: encode the sparse tokens, then interpolate.
ad::Var fps_student_forward(ad::Tape& tape, const PointCloud& cloud, const FpsStudent& student,
                            const TeacherModel& teacher);

struct FpsExample {
    PointCloud cloud;
    Tensor target;  // c x d teacher token field
};

/// SmoothL1 distillation of the sparse tokenizer against the teacher field.
std::vector<double> train_fps_student(FpsStudent& student, const TeacherModel& teacher,
                                      const std::vector<FpsExample>& examples,
                                      const TrainConfig& cfg);

Tensor fps_student_features(const FpsStudent& student, const TeacherModel& teacher,
                            const PointCloud& cloud);

}  // namespace foundry
