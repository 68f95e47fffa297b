#include "foundry/data.hpp"

#include <cmath>
#include <fstream>

#include "foundry/rng.hpp"

namespace foundry {

namespace {

constexpr double kPi = 3.14159265358979323846;

void sample_sphere(std::mt19937_64& rng, double* p) {
    double n2;
    do {
        p[0] = normal(rng);
        p[1] = normal(rng);
        p[2] = normal(rng);
        n2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    for (int j = 0; j < 3; ++j) p[j] *= inv;
}

void sample_cube(std::mt19937_64& rng, double* p) {
    const std::size_t face = static_cast<std::size_t>(uniform01(rng) * 6.0);
    const double u = uniform(rng, -1.0, 1.0);
    const double v = uniform(rng, -1.0, 1.0);
    const std::size_t axis = face / 2;
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    p[axis] = sign;
    p[(axis + 1) % 3] = u;
    p[(axis + 2) % 3] = v;
}

void sample_cylinder(std::mt19937_64& rng, double* p) {
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    p[0] = 0.7 * std::cos(theta);
    p[1] = uniform(rng, -1.0, 1.0);
    p[2] = 0.7 * std::sin(theta);
}

void sample_plane(std::mt19937_64& rng, double* p) {
    p[0] = uniform(rng, -1.0, 1.0);
    p[1] = 0.0;
    p[2] = uniform(rng, -1.0, 1.0);
}

void sample_torus(std::mt19937_64& rng, double* p) {
    const double u = uniform(rng, 0.0, 2.0 * kPi);
    const double v = uniform(rng, 0.0, 2.0 * kPi);
    const double ring = 0.7 + 0.3 * std::cos(v);
    p[0] = ring * std::cos(u);
    p[1] = 0.3 * std::sin(v);
    p[2] = ring * std::sin(u);
}

void sample_shape_point(std::mt19937_64& rng, std::size_t shape_id, double* p) {
    switch (shape_id) {
        case 0: sample_sphere(rng, p); break;
        case 1: sample_cube(rng, p); break;
        case 2: sample_cylinder(rng, p); break;
        case 3: sample_plane(rng, p); break;
        case 4: sample_torus(rng, p); break;
        default: throw ArgumentError("unknown shape id");
    }
}

}  // namespace

const char* shape_name(std::size_t shape_id) {
    static const char* names[] = {"sphere", "cube", "cylinder", "plane", "torus"};
    if (shape_id >= kNumShapeClasses) throw ArgumentError("unknown shape id");
    return names[shape_id];
}

PointCloud make_shape(std::mt19937_64& rng, std::size_t shape_id, std::size_t points,
                      double jitter) {
    if (points == 0) throw ArgumentError("make_shape: need at least one point");
    Tensor pts({points, 3});
    double p[3];
    for (std::size_t i = 0; i < points; ++i) {
        sample_shape_point(rng, shape_id, p);
        for (std::size_t j = 0; j < 3; ++j) pts.at(i, j) = p[j] + jitter * normal(rng);
    }
    PointCloud cloud;
    cloud.points = normalize_to_unit_sphere(pts);
    cloud.label = shape_id;
    return cloud;
}

std::vector<PointCloud> make_class_dataset(std::uint64_t seed, std::size_t n, std::size_t points) {
    auto rng = make_stream(seed, "class-data");
    std::vector<PointCloud> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(make_shape(rng, i % kNumShapeClasses, points));
    return out;
}

std::vector<PointCloud> make_count_dataset(std::uint64_t seed, std::size_t n, std::size_t points) {
    auto rng = make_stream(seed, "count-data");
    std::vector<PointCloud> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t count = i % kNumCountClasses + 1;
        Tensor pts({points, 3});
        std::size_t row = 0;
        for (std::size_t part = 0; part < count; ++part) {
            const std::size_t quota = points / count + (part < points % count ? 1 : 0);
            const std::size_t shape_id =
                static_cast<std::size_t>(uniform01(rng) * kNumShapeClasses);
            double cx = uniform(rng, -0.5, 0.5);
            double cy = uniform(rng, -0.5, 0.5);
            double cz = uniform(rng, -0.5, 0.5);
            double p[3];
            for (std::size_t q = 0; q < quota; ++q, ++row) {
                sample_shape_point(rng, shape_id, p);
                pts.at(row, 0) = 0.35 * p[0] + cx + 0.01 * normal(rng);
                pts.at(row, 1) = 0.35 * p[1] + cy + 0.01 * normal(rng);
                pts.at(row, 2) = 0.35 * p[2] + cz + 0.01 * normal(rng);
            }
        }
        PointCloud cloud;
        cloud.points = normalize_to_unit_sphere(pts);
        cloud.label = count - 1;
        out.push_back(std::move(cloud));
    }
    return out;
}

PointCloud augment(std::mt19937_64& rng, const PointCloud& cloud) {
    const double sx = uniform(rng, 0.8, 1.2);
    const double sy = uniform(rng, 0.8, 1.2);
    const double sz = uniform(rng, 0.8, 1.2);
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    const double c = std::cos(theta), s = std::sin(theta);
    Tensor pts(cloud.points.shape);
    for (std::size_t i = 0; i < cloud.num_points(); ++i) {
        const double x = cloud.points.at(i, 0);
        const double y = cloud.points.at(i, 1);
        const double z = cloud.points.at(i, 2);
        pts.at(i, 0) = sx * (c * x + s * z);
        pts.at(i, 1) = sy * y;
        pts.at(i, 2) = sz * (-s * x + c * z);
    }
    PointCloud out;
    out.points = normalize_to_unit_sphere(pts);
    out.label = cloud.label;
    return out;
}

void save_dataset(const std::string& path, const std::vector<PointCloud>& clouds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    Tensor labels({clouds.size(), 1});
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        if (!clouds[i].label) throw ArgumentError("save_dataset: unlabeled cloud");
        labels.at(i, 0) = static_cast<double>(*clouds[i].label);
    }
    write_ften(os, labels);
    for (const auto& c : clouds) write_ften(os, c.points);
    if (!os) throw IoError("write failed: " + path);
}

std::vector<PointCloud> load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    Tensor labels = read_ften(is);
    if (labels.cols() != 1) throw IoError("dataset labels must be a column: " + path);
    std::vector<PointCloud> out;
    out.reserve(labels.rows());
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        PointCloud c;
        c.points = read_ften(is);
        if (c.points.cols() != 3) throw IoError("dataset clouds must be p x 3: " + path);
        c.label = static_cast<std::size_t>(labels.at(i, 0));
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace foundry
