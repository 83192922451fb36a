#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duodepth/geom.hpp"
#include "testutil.hpp"

using namespace duodepth;
using testutil::random_cloud;
using testutil::random_transform;

TEST_CASE("apply_transform identity is bitwise") {
    Rng rng(1);
    const PointCloud cloud = random_cloud(200, rng, 1.0, true);
    const PointCloud out = apply_transform(cloud, RigidTransform::identity());
    REQUIRE(out.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(out.points[i] == cloud.points[i]);
        CHECK(out.colors[i] == cloud.colors[i]);
    }
}

TEST_CASE("apply_transform translation and rotation") {
    RigidTransform t;
    t.translation = Vec3(0.1, 0, 0);
    PointCloud c;
    c.points.emplace_back(0, 0, 0);
    CHECK((apply_transform(c, t).points[0] - Vec3(0.1, 0, 0)).norm() == 0.0);

    RigidTransform rot;
    rot.rotation = axis_angle_rotation(Vec3::UnitZ(), std::numbers::pi / 2);
    c.points[0] = Vec3(1, 0, 0);
    CHECK((apply_transform(c, rot).points[0] - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("apply_transform preserves pairwise distances") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud cloud = random_cloud(40, rng);
        const RigidTransform t = random_transform(rng);
        const PointCloud out = apply_transform(cloud, t);
        double max_err = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            for (std::size_t j = i + 1; j < cloud.size(); ++j) {
                const double d0 = (cloud.points[i] - cloud.points[j]).norm();
                const double d1 = (out.points[i] - out.points[j]).norm();
                max_err = std::max(max_err, std::abs(d0 - d1));
            }
        CHECK(max_err < 1e-9);
    }
}

TEST_CASE("compose matches homogeneous 4x4 product") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const RigidTransform c = compose(a, b);
        const Eigen::Matrix4d oracle = a.matrix() * b.matrix();
        CHECK((c.matrix() - oracle).cwiseAbs().maxCoeff() < 1e-12);

        // apply b then a on a point
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK((c.apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    }
}

TEST_CASE("compose identity and inverse") {
    Rng rng(4);
    const RigidTransform t = random_transform(rng);
    const RigidTransform id = RigidTransform::identity();
    CHECK((compose(id, t).matrix() - t.matrix()).cwiseAbs().maxCoeff() == 0.0);
    const RigidTransform round = compose(t, t.inverse());
    CHECK((round.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compose is associative") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const RigidTransform c = random_transform(rng);
        const auto lhs = compose(compose(a, b), c).matrix();
        const auto rhs = compose(a, compose(b, c)).matrix();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("nearest neighbor equals brute force") {
    Rng rng(6);
    const PointCloud cloud = random_cloud(1000, rng);
    const NeighborIndex index(cloud);
    for (int q = 0; q < 100; ++q) {
        const Vec3 query(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
        const auto [oracle_idx, oracle_dist] = testutil::brute_nearest(cloud, query);
        const Neighbor got = index.nearest(query);
        CHECK(got.index == oracle_idx);
        CHECK(got.distance == doctest::Approx(oracle_dist).epsilon(1e-12));
    }
}

TEST_CASE("nearest neighbor exact point and tie rule") {
    PointCloud cloud;
    cloud.points.emplace_back(1, 0, 0);
    cloud.points.emplace_back(-1, 0, 0);
    cloud.points.emplace_back(0.3, 2.0, 0);
    const NeighborIndex index(cloud);

    const Neighbor hit = index.nearest(Vec3(0.3, 2.0, 0));
    CHECK(hit.index == 2);
    CHECK(hit.distance == 0.0);

    // equidistant from points 0 and 1
    const Neighbor tie = index.nearest(Vec3(0, 0, 0));
    CHECK(tie.index == 0);
}

TEST_CASE("k nearest equals brute force with duplicates present") {
    Rng rng(7);
    PointCloud cloud = random_cloud(500, rng);
    // inject duplicates to stress tie handling
    for (int i = 0; i < 50; ++i) cloud.points.push_back(cloud.points[std::size_t(i * 7)]);
    const NeighborIndex index(cloud);
    for (int q = 0; q < 50; ++q) {
        const Vec3 query(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const auto oracle = testutil::brute_k_nearest(cloud, query, 9);
        const auto got = index.k_nearest(query, 9);
        REQUIRE(got.size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(got[i].index == oracle[i]);
    }
}

TEST_CASE("nearest on empty cloud") {
    const NeighborIndex index{std::vector<Vec3>{}};
    CHECK_THROWS_WITH_AS(index.nearest(Vec3::Zero()), "empty target", std::runtime_error);
}

TEST_CASE("estimate_normals on a plane") {
    Rng rng(8);
    PointCloud cloud;
    for (int i = 0; i < 400; ++i)
        cloud.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
    const PointCloud out = estimate_normals(cloud, 8);
    REQUIRE(out.has_normals());
    for (const auto& n : out.normals) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-6);
}

TEST_CASE("estimate_normals on a sphere matches radial directions") {
    Rng rng(9);
    PointCloud cloud;
    for (int i = 0; i < 2000; ++i) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        while (v.norm() < 1e-6) v = Vec3(rng.normal(), rng.normal(), rng.normal());
        cloud.points.push_back(v.normalized());
    }
    const PointCloud out = estimate_normals(cloud, 12);
    int good = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 radial = cloud.points[i].normalized();
        const double cosang = std::abs(out.normals[i].dot(radial));
        if (std::acos(std::clamp(cosang, 0.0, 1.0)) * 180.0 / std::numbers::pi < 5.0) ++good;
    }
    CHECK(double(good) / double(cloud.size()) >= 0.99);
}

TEST_CASE("estimate_normals insufficient points and degenerate flagging") {
    PointCloud tiny;
    tiny.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CHECK_THROWS_WITH_AS(estimate_normals(tiny, 5), "insufficient points", std::runtime_error);

    // collinear cloud: every neighborhood is degenerate
    PointCloud line;
    for (int i = 0; i < 20; ++i) line.points.emplace_back(0.01 * i, 0, 0);
    std::vector<std::uint8_t> degenerate;
    const PointCloud out = estimate_normals(line, 4, &degenerate);
    for (std::size_t i = 0; i < line.size(); ++i) {
        CHECK(degenerate[i] == 1);
        CHECK(out.normals[i] == Vec3(0, 0, 1));
    }
}

TEST_CASE("downsample_random without replacement at paper size") {
    Rng rng(10);
    PointCloud cloud = random_cloud(1000, rng, 1.0, true);
    const PointCloud out = downsample_random(cloud, 320, 42);
    REQUIRE(out.size() == 320);
    // all members of the input, all distinct
    std::set<std::array<double, 3>> seen;
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool member = false;
        for (const auto& p : cloud.points)
            if (p == out.points[i]) member = true;
        CHECK(member);
        seen.insert({out.points[i].x(), out.points[i].y(), out.points[i].z()});
    }
    CHECK(seen.size() == 320);
}

TEST_CASE("downsample_random n equal to size is a permutation") {
    Rng rng(11);
    const PointCloud cloud = random_cloud(64, rng);
    const PointCloud out = downsample_random(cloud, 64, 7);
    REQUIRE(out.size() == 64);
    std::vector<bool> used(cloud.size(), false);
    for (const auto& p : out.points) {
        bool found = false;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (!used[i] && cloud.points[i] == p) {
                used[i] = true;
                found = true;
                break;
            }
        CHECK(found);
    }
}

TEST_CASE("downsample_random pads small clouds with replacement") {
    Rng rng(12);
    const PointCloud cloud = random_cloud(100, rng);
    const PointCloud out = downsample_random(cloud, 320, 3);
    REQUIRE(out.size() == 320);
    for (const auto& p : out.points) {
        bool member = false;
        for (const auto& q : cloud.points)
            if (p == q) member = true;
        CHECK(member);
    }
}

TEST_CASE("downsample_random is bit-reproducible per seed") {
    Rng rng(13);
    const PointCloud cloud = random_cloud(500, rng);
    const PointCloud a = downsample_random(cloud, 123, 99);
    const PointCloud b = downsample_random(cloud, 123, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);
    const PointCloud c = downsample_random(cloud, 123, 100);
    bool all_equal = true;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.points[i] != c.points[i]) all_equal = false;
    CHECK_FALSE(all_equal);
}

TEST_CASE("downsample_random empty input") {
    CHECK_THROWS_WITH_AS(downsample_random(PointCloud{}, 10, 0), "empty cloud",
                         std::runtime_error);
}

TEST_CASE("fuse basics") {
    Rng rng(14);
    const PointCloud a = random_cloud(30, rng);
    const PointCloud empty;
    const RigidTransform t = random_transform(rng);

    const PointCloud same = fuse(a, empty, t);
    REQUIRE(same.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(same.points[i] == a.points[i]);

    PointCloud one, two;
    one.points.emplace_back(1, 2, 3);
    two.points.emplace_back(4, 5, 6);
    const PointCloud both = fuse(one, two, RigidTransform::identity());
    REQUIRE(both.size() == 2);
    CHECK(both.points[0] == Vec3(1, 2, 3));
    CHECK(both.points[1] == Vec3(4, 5, 6));
}

TEST_CASE("fuse of two sphere halves restores the full bounding box") {
    Rng rng(15);
    // half-views of a unit sphere at the origin, one in a rotated frame
    const RigidTransform t = random_transform(rng, 1.5, 0.3);  // maps b's frame into a's
    PointCloud a, b;
    for (int i = 0; i < 4000; ++i) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        while (v.norm() < 1e-6) v = Vec3(rng.normal(), rng.normal(), rng.normal());
        v.normalize();
        if (v.z() >= 0) {
            a.points.push_back(v);
        } else {
            b.points.push_back(t.inverse().apply(v));  // express in b's frame
        }
    }
    const PointCloud fused = fuse(a, b, t);
    Vec3 lo = Vec3::Constant(1e9), hi = -lo;
    for (const auto& p : fused.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    for (int axis = 0; axis < 3; ++axis) {
        CHECK(lo[axis] == doctest::Approx(-1.0).epsilon(0.02));
        CHECK(hi[axis] == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("point cloud validation") {
    PointCloud bad;
    bad.points.emplace_back(0, 0, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);

    PointCloud mismatch;
    mismatch.points.emplace_back(0, 0, 0);
    mismatch.colors.emplace_back(0, 0, 0);
    mismatch.colors.emplace_back(1, 1, 1);
    CHECK_THROWS_AS(mismatch.validate(), std::runtime_error);

    PointCloud nonunit;
    nonunit.points.emplace_back(0, 0, 0);
    nonunit.normals.emplace_back(0, 0, 2);
    CHECK_THROWS_AS(nonunit.validate(), std::runtime_error);

    Rng rng(16);
    PointCloud ok = random_cloud(10, rng, 1.0, true);
    ok.normals.assign(10, Vec3(0, 0, 1));
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("rigid transform validity") {
    RigidTransform t = RigidTransform::identity();
    CHECK(t.is_valid());
    t.rotation(0, 0) = 2.0;
    CHECK_FALSE(t.is_valid());

    Mat3 skewed;
    skewed << 1, 0.3, 0, 0, 1, 0, 0, 0, 1;
    const Mat3 fixed = orthonormalize_rotation(skewed);
    CHECK((fixed.transpose() * fixed - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fixed.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}
