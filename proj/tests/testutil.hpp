#pragma once

// Shared fixture generators and small independent oracles for the test
// suites. Everything here is deliberately written with plain loops so it
// does not share code paths with the library implementations it checks.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "duodepth/geom.hpp"
#include "duodepth/common.hpp"

namespace testutil {

using duodepth::Mat3;
using duodepth::PointCloud;
using duodepth::RigidTransform;
using duodepth::Rng;
using duodepth::Vec3;

inline PointCloud random_cloud(std::size_t n, Rng& rng, double extent = 1.0, bool colors = false) {
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        cloud.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                                  rng.uniform(-extent, extent));
        if (colors)
            cloud.colors.emplace_back(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    }
    return cloud;
}

inline RigidTransform random_transform(Rng& rng, double max_angle_rad = 3.0,
                                       double max_shift = 1.0) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-9) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    RigidTransform t;
    t.rotation = duodepth::axis_angle_rotation(axis.normalized(),
                                               rng.uniform(-max_angle_rad, max_angle_rad));
    t.translation =
        Vec3(rng.uniform(-max_shift, max_shift), rng.uniform(-max_shift, max_shift),
             rng.uniform(-max_shift, max_shift));
    return t;
}

// brute-force nearest neighbor, ties to the lowest index
inline std::pair<std::size_t, double> brute_nearest(const PointCloud& cloud, const Vec3& q) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double d2 = (cloud.points[i] - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return {best, std::sqrt(best_d2)};
}

// brute-force k nearest by (distance^2, index)
inline std::vector<std::size_t> brute_k_nearest(const PointCloud& cloud, const Vec3& q,
                                                std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        all.emplace_back((cloud.points[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
    return out;
}

// Wavy height-field surface z = f(x, y) with analytic normals; rich enough
// geometry to pin down all six degrees of freedom.
inline PointCloud wavy_surface(std::size_t n, Rng& rng, double extent = 0.3,
                               double noise_std = 0.0, bool with_colors = false) {
    PointCloud cloud;
    const double a1 = 0.05, k1 = 14.0, a2 = 0.035, k2 = 9.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-extent, extent);
        const double y = rng.uniform(-extent, extent);
        const double z = a1 * std::sin(k1 * x) + a2 * std::cos(k2 * y);
        // gradient (dz/dx, dz/dy) -> normal (-fx, -fy, 1)/norm
        const double fx = a1 * k1 * std::cos(k1 * x);
        const double fy = -a2 * k2 * std::sin(k2 * y);
        Vec3 normal(-fx, -fy, 1.0);
        normal.normalize();
        Vec3 p(x, y, z);
        if (noise_std > 0)
            p += Vec3(rng.normal(0, noise_std), rng.normal(0, noise_std), rng.normal(0, noise_std));
        cloud.points.push_back(p);
        cloud.normals.push_back(normal);
        if (with_colors) {
            const double v = 0.5 + 0.4 * std::sin(11.0 * x + 6.0 * y);
            cloud.colors.emplace_back(v, 0.5 + 0.4 * std::cos(8.0 * x - 5.0 * y), 1.0 - v);
        }
    }
    return cloud;
}

// Flat z=0 plane with a smooth "checker-like" intensity field; geometrically
// ambiguous for in-plane motion, photometrically constrained.
inline PointCloud textured_plane(std::size_t n, Rng& rng, double extent = 0.3) {
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-extent, extent);
        const double y = rng.uniform(-extent, extent);
        cloud.points.emplace_back(x, y, 0.0);
        const double v = 0.5 + 0.45 * std::sin(2.0 * std::numbers::pi * x / 0.06) *
                                   std::sin(2.0 * std::numbers::pi * y / 0.06);
        cloud.colors.emplace_back(v, v, v);
        cloud.normals.emplace_back(0.0, 0.0, 1.0);
    }
    return cloud;
}

inline double rotation_angle_deg(const Mat3& a, const Mat3& b) {
    const Mat3 r = a.transpose() * b;
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("duodepth_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
