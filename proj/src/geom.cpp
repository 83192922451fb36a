#include "duodepth/geom.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace duodepth {

void PointCloud::validate() const {
    auto finite3 = [](const Vec3& v) { return v.allFinite(); };
    for (const auto& p : points)
        if (!finite3(p)) throw std::runtime_error("point cloud contains non-finite coordinates");
    if (!colors.empty() && colors.size() != points.size())
        throw std::runtime_error("color attribute length mismatch");
    if (!normals.empty() && normals.size() != points.size())
        throw std::runtime_error("normal attribute length mismatch");
    for (const auto& c : colors)
        if (!finite3(c)) throw std::runtime_error("point cloud contains non-finite colors");
    for (const auto& n : normals) {
        if (!finite3(n)) throw std::runtime_error("point cloud contains non-finite normals");
        if (std::abs(n.norm() - 1.0) > 1e-6) throw std::runtime_error("normal is not unit length");
    }
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
}

bool RigidTransform::is_valid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() >= tol) return false;
    return std::abs(rotation.determinant() - 1.0) < tol;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

Mat3 axis_angle_rotation(const Vec3& axis, double angle_rad) {
    const double n = axis.norm();
    if (n < 1e-300) return Mat3::Identity();
    const Vec3 u = axis / n;
    Mat3 k;
    k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
    return Mat3::Identity() + std::sin(angle_rad) * k + (1.0 - std::cos(angle_rad)) * k * k;
}

Mat3 orthonormalize_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = t.rotation * p + t.translation;
    for (auto& n : out.normals) n = t.rotation * n;
    return out;
}

// ---------------------------------------------------------------------------
// NeighborIndex

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

NeighborIndex::NeighborIndex(std::vector<Vec3> points) : pts_(std::move(points)) {
    order_.resize(pts_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!pts_.empty()) {
        nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
        build(0, static_cast<std::uint32_t>(pts_.size()));
    }
}

std::int32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.bb_min = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.bb_max = -node.bb_min;
    for (std::uint32_t i = begin; i < end; ++i) {
        node.bb_min = node.bb_min.cwiseMin(pts_[order_[i]]);
        node.bb_max = node.bb_max.cwiseMax(pts_[order_[i]]);
    }
    node.begin = begin;
    node.end = end;

    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);

    const Vec3 extent = node.bb_max - node.bb_min;
    if (end - begin <= kLeafSize || extent.maxCoeff() <= 0.0) return id;

    int axis = 0;
    extent.maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return pts_[a][axis] < pts_[b][axis]; });

    nodes_[id].axis = static_cast<std::uint8_t>(axis);
    nodes_[id].split = pts_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    nodes_[id].left = left;
    const std::int32_t right = build(mid, end);
    nodes_[id].right = right;
    return id;
}

double NeighborIndex::dist2_to_box(const Vec3& q, const Vec3& lo, const Vec3& hi) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        if (q[a] < lo[a]) d = lo[a] - q[a];
        else if (q[a] > hi[a]) d = q[a] - hi[a];
        d2 += d * d;
    }
    return d2;
}

Neighbor NeighborIndex::nearest(const Vec3& query) const {
    if (pts_.empty()) throw std::runtime_error("empty target");
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    // candidate acceptance and pruning are lexicographic on (d2, index) so
    // results match a brute-force scan even through ties
    auto consider = [&](std::uint32_t i) {
        const double d2 = (pts_[i] - query).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && i < best_idx)) {
            best_d2 = d2;
            best_idx = i;
        }
    };
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (dist2_to_box(query, node.bb_min, node.bb_max) > best_d2) continue;
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) consider(order_[i]);
            continue;
        }
        if (query[node.axis] < node.split) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return {best_idx, std::sqrt(best_d2)};
}

std::vector<Neighbor> NeighborIndex::k_nearest(const Vec3& query, std::size_t k) const {
    if (pts_.empty()) throw std::runtime_error("empty target");
    k = std::min(k, pts_.size());
    using Entry = std::pair<double, std::size_t>;  // (d2, index), max-heap
    std::priority_queue<Entry> heap;
    auto consider = [&](std::uint32_t i) {
        const Entry e{(pts_[i] - query).squaredNorm(), i};
        if (heap.size() < k) {
            heap.push(e);
        } else if (e < heap.top()) {
            heap.pop();
            heap.push(e);
        }
    };
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (heap.size() == k && dist2_to_box(query, node.bb_min, node.bb_max) > heap.top().first)
            continue;
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) consider(order_[i]);
            continue;
        }
        if (query[node.axis] < node.split) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out[i] = {heap.top().second, std::sqrt(heap.top().first)};
        heap.pop();
    }
    return out;
}

// ---------------------------------------------------------------------------

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k,
                            std::vector<std::uint8_t>* degenerate) {
    if (k < 3) throw std::invalid_argument("estimate_normals: k must be at least 3");
    if (cloud.size() < k + 1) throw std::runtime_error("insufficient points");

    const NeighborIndex index(cloud);
    PointCloud out = cloud;
    out.normals.assign(cloud.size(), Vec3(0, 0, 1));
    if (degenerate) degenerate->assign(cloud.size(), 0);

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto nbrs = index.k_nearest(cloud.points[i], k + 1);
        Vec3 mean = Vec3::Zero();
        for (const auto& nb : nbrs) mean += cloud.points[nb.index];
        mean /= double(nbrs.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& nb : nbrs) {
            const Vec3 d = cloud.points[nb.index] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 evals = eig.eigenvalues();  // ascending
        if (evals[2] <= 0.0 || evals[1] <= evals[2] * 1e-9) {
            // collinear or coincident neighborhood: keep (0,0,1), flag
            if (degenerate) (*degenerate)[i] = 1;
            continue;
        }
        Vec3 n = eig.eigenvectors().col(0).normalized();
        constexpr double tie = 1e-12;
        if (n.z() < -tie) n = -n;
        else if (std::abs(n.z()) <= tie) {
            if (n.x() < -tie) n = -n;
            else if (std::abs(n.x()) <= tie && n.y() < 0) n = -n;
        }
        out.normals[i] = n;
    }
    return out;
}

PointCloud downsample_random(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
    if (cloud.empty()) throw std::runtime_error("empty cloud");
    if (n == 0) throw std::invalid_argument("downsample_random: n must be positive");

    Rng rng(seed);
    std::vector<std::size_t> picks;
    picks.reserve(n);
    if (cloud.size() >= n) {
        // partial Fisher-Yates: n distinct indices without replacement
        std::vector<std::size_t> idx(cloud.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + rng.uniform_index(idx.size() - i);
            std::swap(idx[i], idx[j]);
            picks.push_back(idx[i]);
        }
    } else {
        for (std::size_t i = 0; i < cloud.size(); ++i) picks.push_back(i);
        while (picks.size() < n) picks.push_back(rng.uniform_index(cloud.size()));
    }

    PointCloud out;
    out.points.reserve(n);
    if (cloud.has_colors()) out.colors.reserve(n);
    if (cloud.has_normals()) out.normals.reserve(n);
    for (std::size_t i : picks) {
        out.points.push_back(cloud.points[i]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
        if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
    }
    return out;
}

PointCloud fuse(const PointCloud& a, const PointCloud& b, const RigidTransform& t) {
    const PointCloud tb = apply_transform(b, t);
    PointCloud out = a;
    out.points.insert(out.points.end(), tb.points.begin(), tb.points.end());

    const bool keep_colors = (a.empty() || a.has_colors()) && (tb.empty() || tb.has_colors()) &&
                             (a.has_colors() || tb.has_colors());
    const bool keep_normals = (a.empty() || a.has_normals()) && (tb.empty() || tb.has_normals()) &&
                              (a.has_normals() || tb.has_normals());
    if (keep_colors) {
        out.colors.insert(out.colors.end(), tb.colors.begin(), tb.colors.end());
    } else {
        out.colors.clear();
    }
    if (keep_normals) {
        out.normals.insert(out.normals.end(), tb.normals.begin(), tb.normals.end());
    } else {
        out.normals.clear();
    }
    return out;
}

}  // namespace duodepth
