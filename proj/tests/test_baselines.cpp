#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "foundry/baselines.hpp"
#include "foundry/rng.hpp"

using namespace foundry;

TEST_CASE("kmeans recovers two well separated blobs") {
    Tensor rows({4, 2}, {0.0, 0.0, 0.1, 0.0, 4.0, 4.0, 4.1, 4.0});
    KMeansResult res = kmeans_fit(rows, 2, 1);
    CHECK(res.assign[0] == res.assign[1]);
    CHECK(res.assign[2] == res.assign[3]);
    CHECK(res.assign[0] != res.assign[2]);
    const std::size_t lo = res.assign[0], hi = res.assign[2];
    CHECK(res.centroids.at(lo, 0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(res.centroids.at(lo, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.centroids.at(hi, 0) == doctest::Approx(4.05).epsilon(1e-12));
    CHECK(res.centroids.at(hi, 1) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("kmeans is deterministic per seed and validates k") {
    auto rng = make_stream(2, "km");
    Tensor rows({20, 3});
    for (auto& v : rows.data) v = normal(rng);
    KMeansResult a = kmeans_fit(rows, 4, 9);
    KMeansResult b = kmeans_fit(rows, 4, 9);
    CHECK(a.assign == b.assign);
    CHECK(a.centroids.data == b.centroids.data);
    CHECK_THROWS_AS(kmeans_fit(rows, 0, 1), ArgumentError);
    CHECK_THROWS_AS(kmeans_fit(rows, 21, 1), ArgumentError);
}

TEST_CASE("kmeans survives duplicate points without dividing by zero") {
    Tensor rows({6, 2}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    KMeansResult res = kmeans_fit(rows, 3, 5);
    for (double v : res.centroids.data) CHECK(std::isfinite(v));
    for (std::size_t a : res.assign) CHECK(a < 3);
}

TEST_CASE("random sample inference preserves index order") {
    auto rng = make_stream(3, "rsi");
    for (int trial = 0; trial < 20; ++trial) {
        auto idx = random_sample_inference(rng, 50, 12);
        REQUIRE(idx.size() == 12);
        CHECK(std::is_sorted(idx.begin(), idx.end()));
        std::set<std::size_t> uniq(idx.begin(), idx.end());
        CHECK(uniq.size() == 12);
        for (auto i : idx) CHECK(i < 50);
    }
}

TEST_CASE("groupsize inference widens groups as centers shrink") {
    auto data = make_class_dataset(4, 1, 40);
    TokenizerConfig cfg;
    cfg.c = 10;
    cfg.k = 8;
    cfg.d = 8;
    TokenizerParams params = TokenizerParams::init(cfg, 5);
    ad::Tape tape;
    TokenizedInput ti = groupsize_inference(tape, data[0], params, 5);
    CHECK(ti.centers.size() == 5);
    // k = floor(2 * 40 / 5) = 16
    for (const auto& g : ti.groups) CHECK(g.size() == 16);

    TokenizedInput clamp = groupsize_inference(tape, data[0], params, 1);
    CHECK(clamp.groups[0].size() == 40);
}

TEST_CASE("upsample weights are row-stochastic over three neighbors") {
    auto rng = make_stream(6, "up");
    Tensor dense({10, 3}), sparse({4, 3});
    for (auto& v : dense.data) v = normal(rng);
    for (auto& v : sparse.data) v = normal(rng);
    Tensor w = knn_upsample_weights(dense, sparse);
    REQUIRE(w.rows() == 10);
    REQUIRE(w.cols() == 4);
    for (std::size_t i = 0; i < 10; ++i) {
        double sum = 0.0;
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(w.at(i, j) >= 0.0);
            sum += w.at(i, j);
            if (w.at(i, j) > 0.0) ++nonzero;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(nonzero == 3);
    }
}

TEST_CASE("coincident centers dominate the interpolation") {
    Tensor dense({1, 3}, {0.0, 0.0, 0.0});
    Tensor sparse({3, 3}, {0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0});
    Tensor w = knn_upsample_weights(dense, sparse);
    CHECK(w.at(0, 0) > 0.99);
}

TEST_CASE("fps student reconstructs the dense token count") {
    TokenizerConfig tc;
    tc.c = 8;
    tc.k = 4;
    tc.d = 16;
    EncoderConfig ec;
    ec.layers = 2;
    ec.d = 16;
    ec.heads = 4;
    TeacherModel teacher = TeacherModel::init(tc, ec, kNumShapeClasses, 7);
    teacher.freeze();
    auto data = make_class_dataset(8, 2, 32);

    FpsStudent student = FpsStudent::init(tc, 3, 9);
    CHECK(student.sparse_config.c == 3);
    ad::Tape tape;
    ad::Var y = fps_student_forward(tape, data[0], student, teacher);
    CHECK(y->value.rows() == 8);
    CHECK(y->value.cols() == 16);
    CHECK(y->value.all_finite());
    CHECK_THROWS_AS(FpsStudent::init(tc, 0, 1), ArgumentError);
    CHECK_THROWS_AS(FpsStudent::init(tc, 9, 1), ArgumentError);
}

TEST_CASE("fps student training reduces the reconstruction loss") {
    TokenizerConfig tc;
    tc.c = 8;
    tc.k = 4;
    tc.d = 16;
    EncoderConfig ec;
    ec.layers = 1;
    ec.d = 16;
    ec.heads = 4;
    TeacherModel teacher = TeacherModel::init(tc, ec, kNumShapeClasses, 11);
    auto data = make_class_dataset(9, 24, 32);
    train_teacher(teacher, data, 1, 12);

    auto prepared = prepare_examples(teacher, data);
    std::vector<FpsExample> examples;
    for (std::size_t i = 0; i < data.size(); ++i)
        examples.push_back(FpsExample{data[i], prepared[i].target});

    FpsStudent student = FpsStudent::init(tc, 3, 13);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.lr = {1e-6, 2e-4, 1e-6, 2, 10};
    cfg.adamw.weight_decay = 0.0;
    auto losses = train_fps_student(student, teacher, examples, cfg);
    CHECK(losses.back() < losses.front());
}

TEST_CASE("kmeans codebook routes encoded prototypes back to tokens") {
    TokenizerConfig tc;
    tc.c = 8;
    tc.k = 4;
    tc.d = 16;
    EncoderConfig ec;
    ec.layers = 1;
    ec.d = 16;
    ec.heads = 4;
    TeacherModel teacher = TeacherModel::init(tc, ec, kNumShapeClasses, 15);
    teacher.freeze();
    auto data = make_class_dataset(10, 6, 32);
    auto examples = prepare_examples(teacher, data);
    KMeansCodebook cb = kmeans_codebook(teacher, examples, 3, 17);
    CHECK(cb.centroids.rows() == 3);
    CHECK(cb.encoded.rows() == 3);
    CHECK(cb.encoded.all_finite());
    Tensor feats = kmeans_student_features(cb, examples[0]);
    CHECK(feats.rows() == 8);
    CHECK(feats.cols() == 16);
    CHECK(feats.all_finite());
    // every row is one of the 3 encoded prototypes
    std::set<std::vector<double>> protos;
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<double> r(16);
        for (std::size_t e = 0; e < 16; ++e) r[e] = cb.encoded.at(j, e);
        protos.insert(r);
    }
    for (std::size_t i = 0; i < 8; ++i) {
        std::vector<double> r(16);
        for (std::size_t e = 0; e < 16; ++e) r[e] = feats.at(i, e);
        CHECK(protos.count(r) == 1);
    }
}
