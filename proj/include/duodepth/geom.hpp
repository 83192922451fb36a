#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "duodepth/common.hpp"

namespace duodepth {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Ordered set of 3D points (meters) with optional per-point color and
// normal attributes. Attribute vectors are either empty or exactly as
// long as `points`.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> colors;   // rgb, each channel in [0,1]
    std::vector<Vec3> normals;  // unit length

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }

    // Throws std::runtime_error on non-finite values, attribute length
    // mismatch, or non-unit normals.
    void validate() const;
};

// SE(3) element; p -> rotation * p + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const;
    Eigen::Matrix4d matrix() const;

    // ||R^T R - I||_inf < tol and det(R) within tol of +1
    bool is_valid(double tol = 1e-9) const;
};

// Applies b then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

// Rotation of `angle_rad` about unit `axis` (Rodrigues).
Mat3 axis_angle_rotation(const Vec3& axis, double angle_rad);

// Nearest rotation matrix (polar decomposition via SVD, det fixed to +1).
Mat3 orthonormalize_rotation(const Mat3& m);

// Points and normals rotate; colors are copied through.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
};

// Static k-d tree over a copied point set. Immutable after construction;
// queries reproduce a brute-force scan exactly, distance ties resolving
// to the lowest point index.
class NeighborIndex {
public:
    explicit NeighborIndex(std::vector<Vec3> points);
    explicit NeighborIndex(const PointCloud& cloud) : NeighborIndex(cloud.points) {}

    std::size_t size() const { return pts_.size(); }
    const Vec3& point(std::size_t i) const { return pts_[i]; }

    // Throws "empty target" when built over zero points.
    Neighbor nearest(const Vec3& query) const;

    // k closest points ordered by (distance, index); returns fewer when
    // the cloud has fewer than k points.
    std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k) const;

private:
    struct Node {
        Vec3 bb_min, bb_max;
        double split = 0.0;
        std::int32_t left = -1, right = -1;
        std::uint32_t begin = 0, end = 0;
        std::uint8_t axis = 0;
        bool leaf() const { return left < 0; }
    };

    std::vector<Vec3> pts_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    static double dist2_to_box(const Vec3& q, const Vec3& lo, const Vec3& hi);
};

// Per-point normals from the least-eigenvalue eigenvector of the
// covariance over each point and its k nearest neighbors. Normals are
// oriented toward +Z (ties toward +X, then +Y). Points with a degenerate
// (collinear) neighborhood get (0,0,1) and are flagged when `degenerate`
// is supplied.
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k,
                            std::vector<std::uint8_t>* degenerate = nullptr);

// n distinct points without replacement when the cloud is large enough;
// otherwise the whole cloud padded by resampling with replacement.
// Deterministic per seed.
PointCloud downsample_random(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

// a followed by apply_transform(b, t). Attributes are kept only when
// every non-empty input carries them.
PointCloud fuse(const PointCloud& a, const PointCloud& b, const RigidTransform& t);

}  // namespace duodepth
