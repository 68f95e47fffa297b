#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "foundry/data.hpp"
#include "foundry/rng.hpp"

using namespace foundry;

TEST_CASE("class dataset is balanced, labeled and normalized") {
    auto data = make_class_dataset(11, 25, 64);
    REQUIRE(data.size() == 25);
    std::size_t counts[kNumShapeClasses] = {0};
    for (const auto& c : data) {
        REQUIRE(c.label.has_value());
        ++counts[*c.label];
        CHECK(c.num_points() == 64);
        double maxn = 0.0;
        for (std::size_t i = 0; i < 64; ++i) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < 3; ++j) n2 += c.points.at(i, j) * c.points.at(i, j);
            maxn = std::max(maxn, std::sqrt(n2));
        }
        CHECK(maxn == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (std::size_t k = 0; k < kNumShapeClasses; ++k) CHECK(counts[k] == 5);
}

TEST_CASE("generation is seed-deterministic") {
    auto a = make_class_dataset(3, 8, 32);
    auto b = make_class_dataset(3, 8, 32);
    auto c = make_class_dataset(4, 8, 32);
    CHECK(a[5].points.data == b[5].points.data);
    CHECK(a[5].points.data != c[5].points.data);
}

TEST_CASE("count dataset labels match the shape count") {
    auto data = make_count_dataset(7, 9, 60);
    REQUIRE(data.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(*data[i].label == i % kNumCountClasses);
        CHECK(data[i].num_points() == 60);
    }
}

TEST_CASE("augmentation keeps labels and the unit sphere") {
    auto data = make_class_dataset(5, 5, 48);
    auto rng = make_stream(6, "aug");
    for (const auto& c : data) {
        PointCloud a = augment(rng, c);
        CHECK(*a.label == *c.label);
        CHECK(a.num_points() == c.num_points());
        CHECK(a.points.data != c.points.data);
        double maxn = 0.0;
        for (std::size_t i = 0; i < a.num_points(); ++i) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < 3; ++j) n2 += a.points.at(i, j) * a.points.at(i, j);
            maxn = std::max(maxn, n2);
        }
        CHECK(std::sqrt(maxn) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("shape names cover the classes") {
    CHECK(std::string(shape_name(0)) == "sphere");
    CHECK(std::string(shape_name(4)) == "torus");
    CHECK_THROWS_AS(shape_name(5), ArgumentError);
}

TEST_CASE("dataset file round trip") {
    const char* path = "dataset_roundtrip.bin";
    auto data = make_class_dataset(9, 7, 24);
    save_dataset(path, data);
    auto back = load_dataset(path);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(*back[i].label == *data[i].label);
        CHECK(back[i].points.data == data[i].points.data);
    }
    std::remove(path);
}
