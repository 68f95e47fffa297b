#include "foundry/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "foundry/rng.hpp"

namespace foundry {

namespace {

double row_sq_dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double acc = 0.0;
    for (std::size_t col = 0; col < a.cols(); ++col) {
        const double d = a.at(i, col) - b.at(j, col);
        acc += d * d;
    }
    return acc;
}

}  // namespace

KMeansResult kmeans_fit(const Tensor& rows, std::size_t k, std::uint64_t seed,
                        std::size_t max_iters) {
    const std::size_t n = rows.rows(), d = rows.cols();
    if (k == 0 || k > n) throw ArgumentError("kmeans: k must be in [1, n]");
    auto rng = make_stream(seed, "kmeans-init");
    const auto pick = sample_without_replacement(rng, n, k);

    KMeansResult res;
    res.centroids = Tensor({k, d});
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) res.centroids.at(c, j) = rows.at(pick[c], j);
    res.assign.assign(n, 0);

    for (res.iters = 1; res.iters <= max_iters; ++res.iters) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = row_sq_dist(rows, i, res.centroids, c);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (best != res.assign[i]) changed = true;
            res.assign[i] = best;
        }
        if (!changed && res.iters > 1) break;

        Tensor sums = Tensor::zeros(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[res.assign[i]];
            for (std::size_t j = 0; j < d; ++j) sums.at(res.assign[i], j) += rows.at(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < d; ++j)
                    res.centroids.at(c, j) = sums.at(c, j) / static_cast<double>(counts[c]);
            } else {
                // Reseed from the globally farthest point from its centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist = row_sq_dist(rows, i, res.centroids, res.assign[i]);
                    if (dist > far_d) {
                        far_d = dist;
                        far = i;
                    }
                }
                for (std::size_t j = 0; j < d; ++j) res.centroids.at(c, j) = rows.at(far, j);
            }
        }
    }
    return res;
}

KMeansCodebook kmeans_codebook(const TeacherModel& teacher, const std::vector<Example>& examples,
                               std::size_t k, std::uint64_t seed) {
    if (examples.empty()) throw ArgumentError("kmeans_codebook: no examples");
    const std::size_t c = examples[0].tokens.rows();
    const std::size_t d = examples[0].tokens.cols();
    Tensor all({examples.size() * c, d});
    std::size_t row = 0;
    for (const auto& ex : examples) {
        for (std::size_t i = 0; i < c; ++i, ++row)
            for (std::size_t j = 0; j < d; ++j)
                all.at(row, j) = ex.tokens.at(i, j) + ex.pos.at(i, j);
    }
    KMeansCodebook cb;
    KMeansResult km = kmeans_fit(all, k, seed);
    cb.centroids = std::move(km.centroids);
    ad::Tape tape;
    cb.encoded = encode(tape, tape.constant(cb.centroids), teacher.enc)->value;
    return cb;
}

Tensor kmeans_student_features(const KMeansCodebook& codebook, const Example& ex) {
    const std::size_t k = codebook.centroids.rows();
    const std::size_t d = codebook.centroids.cols();
    if (ex.tokens.cols() != d)
        throw DimensionError("kmeans_student_features: token dim != codebook dim");
    Tensor out({ex.tokens.rows(), d});
    for (std::size_t i = 0; i < ex.tokens.rows(); ++i) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            double d2 = 0.0;
            for (std::size_t e = 0; e < d; ++e) {
                const double diff =
                    ex.tokens.at(i, e) + ex.pos.at(i, e) - codebook.centroids.at(j, e);
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        for (std::size_t e = 0; e < d; ++e) out.at(i, e) = codebook.encoded.at(best, e);
    }
    return out;
}

std::vector<std::size_t> random_sample_inference(std::mt19937_64& rng, std::size_t n,
                                                 std::size_t k) {
    auto idx = sample_without_replacement(rng, n, k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

TokenizedInput groupsize_inference(ad::Tape& tape, const PointCloud& cloud,
                                   const TokenizerParams& params, std::size_t c_new) {
    if (c_new == 0) throw ArgumentError("groupsize_inference: c_new must be positive");
    const std::size_t p = cloud.num_points();
    const std::size_t k = std::min(p, 2 * p / c_new);
    if (k == 0) throw ArgumentError("groupsize_inference: group size collapsed to zero");
    return tokenize_with(tape, cloud, params, c_new, k);
}

FpsStudent FpsStudent::init(const TokenizerConfig& dense, std::size_t s, std::uint64_t seed) {
    if (s == 0 || s > dense.c) throw ArgumentError("fps student: s must be in [1, c]");
    FpsStudent fs;
    fs.sparse_config = dense;
    fs.sparse_config.c = s;
    fs.tok = TokenizerParams::init(fs.sparse_config, seed);
    fs.trainable.merge(fs.tok.params, "fps.");
    fs.trainable.set_trainable(true);
    return fs;
}

Tensor knn_upsample_weights(const Tensor& dense_xyz, const Tensor& sparse_xyz) {
    const std::size_t c = dense_xyz.rows(), s = sparse_xyz.rows();
    const std::size_t nn = std::min<std::size_t>(3, s);
    Tensor w = Tensor::zeros(c, s);
    std::vector<std::pair<double, std::size_t>> dist(s);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < s; ++j)
            dist[j] = {std::sqrt(row_sq_dist(dense_xyz, i, sparse_xyz, j)), j};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(nn), dist.end());
        double total = 0.0;
        for (std::size_t q = 0; q < nn; ++q) total += 1.0 / (dist[q].first + 1e-8);
        for (std::size_t q = 0; q < nn; ++q)
            w.at(i, dist[q].second) = 1.0 / (dist[q].first + 1e-8) / total;
    }
    return w;
}

ad::Var fps_student_forward(ad::Tape& tape, const PointCloud& cloud, const FpsStudent& student,
                            const TeacherModel& teacher) {
    TokenizedInput sparse = tokenize(tape, cloud, student.tok);
    ad::Var enc = encode(tape, tape.add(sparse.tokens, sparse.pos_embed), teacher.enc);

    const auto dense_centers = farthest_point_sample(cloud, teacher.tok_config.c);
    Tensor dense_xyz({dense_centers.size(), 3});
    for (std::size_t i = 0; i < dense_centers.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) dense_xyz.at(i, j) = cloud.points.at(dense_centers[i], j);
    Tensor sparse_xyz({sparse.centers.size(), 3});
    for (std::size_t i = 0; i < sparse.centers.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j)
            sparse_xyz.at(i, j) = cloud.points.at(sparse.centers[i], j);

    ad::Var w = tape.constant(knn_upsample_weights(dense_xyz, sparse_xyz));
    return tape.matmul(w, enc);
}

std::vector<double> train_fps_student(FpsStudent& student, const TeacherModel& teacher,
                                      const std::vector<FpsExample>& examples,
                                      const TrainConfig& cfg) {
    if (examples.empty()) throw ArgumentError("fps student: empty example set");
    AdamW opt(cfg.adamw, student.trainable);
    auto shuffle_rng = make_stream(cfg.seed, "fps-shuffle");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> losses;
    losses.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cfg.lr.at(epoch);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t bn = std::min(cfg.batch_size, order.size() - b);
            student.trainable.zero_grads();
            for (std::size_t i = 0; i < bn; ++i) {
                const auto& ex = examples[order[b + i]];
                ad::Tape tape;
                ad::Var yhat = fps_student_forward(tape, ex.cloud, student, teacher);
                ad::Var loss = tape.smooth_l1(yhat, tape.constant(ex.target));
                tape.backward(loss, 1.0 / static_cast<double>(bn));
                epoch_loss += loss->value.scalar_value();
            }
            opt.step(lr);
        }
        losses.push_back(epoch_loss / static_cast<double>(examples.size()));
    }
    return losses;
}

Tensor fps_student_features(const FpsStudent& student, const TeacherModel& teacher,
                            const PointCloud& cloud) {
    ad::Tape tape;
    return fps_student_forward(tape, cloud, student, teacher)->value;
}

}  // namespace foundry
