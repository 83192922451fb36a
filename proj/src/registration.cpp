#include "duodepth/registration.hpp"

#include <cmath>

namespace duodepth {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct Correspondence {
    std::size_t src;
    std::size_t tgt;
};

std::vector<Correspondence> find_correspondences(const PointCloud& source,
                                                 const RigidTransform& t,
                                                 const NeighborIndex& target_index,
                                                 double max_dist) {
    std::vector<Correspondence> out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Vec3 p = t.apply(source.points[i]);
        const Neighbor nb = target_index.nearest(p);
        if (nb.distance <= max_dist) out.push_back({i, nb.index});
    }
    return out;
}

bool solve_damped(const Mat6& h, const Vec6& g, Vec6& dx) {
    const double tr = h.trace();
    double lambda = (tr > 0 ? tr : 1.0) * 1e-10;
    for (int attempt = 0; attempt < 8; ++attempt) {
        const Mat6 hd = h + lambda * Mat6::Identity();
        const Eigen::LDLT<Mat6> ldlt(hd);
        if (ldlt.info() == Eigen::Success) {
            dx = ldlt.solve(-g);
            // reject wild steps; the linearization only holds for small ones
            if (dx.allFinite() && dx.head<3>().norm() < 1.0 && dx.tail<3>().norm() < 1.0)
                return true;
        }
        lambda *= 100.0;
    }
    return false;
}

RigidTransform apply_update(const Vec6& dx, const RigidTransform& t) {
    RigidTransform upd;
    const Vec3 omega = dx.head<3>();
    upd.rotation = axis_angle_rotation(omega, omega.norm());
    upd.translation = dx.tail<3>();
    RigidTransform out = compose(upd, t);
    out.rotation = orthonormalize_rotation(out.rotation);
    return out;
}

double point_rmse(const PointCloud& source, const PointCloud& target, const RigidTransform& t,
                  const std::vector<Correspondence>& corrs) {
    if (corrs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& c : corrs)
        sum += (t.apply(source.points[c.src]) - target.points[c.tgt]).squaredNorm();
    return std::sqrt(sum / double(corrs.size()));
}

// Per-target-point intensity gradient on the tangent plane, least squares
// over the k nearest neighbors with the normal direction constrained out.
std::vector<Vec3> intensity_gradients(const PointCloud& target,
                                      const std::vector<double>& intensity,
                                      const NeighborIndex& index, int k) {
    std::vector<Vec3> grads(target.size(), Vec3::Zero());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const Vec3& q = target.points[i];
        const Vec3& n = target.normals[i];
        const auto nbrs = index.k_nearest(q, std::size_t(k) + 1);
        Mat3 a = n * n.transpose();
        Vec3 b = Vec3::Zero();
        for (const auto& nb : nbrs) {
            if (nb.index == i) continue;
            const Vec3 d = target.points[nb.index] - q;
            const Vec3 v = d - d.dot(n) * n;  // tangent-plane offset
            a += v * v.transpose();
            b += v * (intensity[nb.index] - intensity[i]);
        }
        a += Mat3::Identity() * (1e-12 * (1.0 + a.trace()));
        grads[i] = a.ldlt().solve(b);
        if (!grads[i].allFinite()) grads[i] = Vec3::Zero();
    }
    return grads;
}

std::vector<double> intensities(const PointCloud& cloud) {
    std::vector<double> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = cloud.colors[i].mean();
    return out;
}

}  // namespace

Mat3 camera_mount_rotation(double yaw_deg, double pitch_deg) {
    const double yaw = yaw_deg * std::numbers::pi / 180.0;
    const double pitch = pitch_deg * std::numbers::pi / 180.0;
    const Mat3 ry = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
    const Mat3 rx = Eigen::AngleAxisd(-pitch, Vec3::UnitX()).toRotationMatrix();
    return ry * rx;
}

RigidTransform seed_from_rig(const RigGeometry& rig) {
    if (!std::isfinite(rig.yaw_deg) || !std::isfinite(rig.pitch_deg) || !rig.baseline.allFinite())
        throw std::invalid_argument("seed_from_rig: rig geometry must be finite");
    const Mat3 c_left = camera_mount_rotation(rig.yaw_deg / 2.0, rig.pitch_deg);
    const Mat3 c_right = camera_mount_rotation(-rig.yaw_deg / 2.0, rig.pitch_deg);
    RigidTransform t;
    t.rotation = c_left.transpose() * c_right;
    t.translation = rig.baseline;
    return t;
}

IcpResult icp_point_to_plane(const PointCloud& source, const PointCloud& target,
                             const IcpParams& params) {
    if (source.empty() || target.empty()) throw std::runtime_error("empty cloud");
    if (!target.has_normals()) throw std::runtime_error("normals required");
    if (params.delta < 0.0 || params.delta > 1.0)
        throw std::invalid_argument("icp: delta must be in [0,1]");
    if (params.correspondence_distance <= 0.0 || params.max_iterations < 1)
        throw std::invalid_argument("icp: bad parameters");

    const NeighborIndex index(target);
    RigidTransform t = params.seed_transform;

    auto evaluate = [&](const std::vector<Correspondence>& corrs, const RigidTransform& tr) {
        double sum = 0.0;
        for (const auto& c : corrs) {
            const Vec3 p = tr.apply(source.points[c.src]);
            const double r = (p - target.points[c.tgt]).dot(target.normals[c.tgt]);
            sum += r * r;
        }
        return sum / double(corrs.size());
    };

    auto corrs = find_correspondences(source, t, index, params.correspondence_distance);
    if (corrs.empty()) throw std::runtime_error("registration diverged: no correspondences");

    IcpResult result;
    double objective = evaluate(corrs, t);
    result.objective_trace.push_back(objective);

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        if (corrs.size() < 6) throw std::runtime_error("degenerate geometry");
        Mat6 h = Mat6::Zero();
        Vec6 g = Vec6::Zero();
        for (const auto& c : corrs) {
            const Vec3 p = t.apply(source.points[c.src]);
            const Vec3& q = target.points[c.tgt];
            const Vec3& n = target.normals[c.tgt];
            const double r = (p - q).dot(n);
            Vec6 j;
            j.head<3>() = p.cross(n);
            j.tail<3>() = n;
            h += j * j.transpose();
            g += j * r;
        }
        Vec6 dx;
        if (!solve_damped(h, g, dx)) throw std::runtime_error("degenerate geometry");

        double scale = 1.0;
        bool accepted = false;
        RigidTransform t_cand;
        std::vector<Correspondence> corrs_cand;
        double obj_cand = objective;
        for (int attempt = 0; attempt < 12; ++attempt) {
            t_cand = apply_update(dx * scale, t);
            corrs_cand = find_correspondences(source, t_cand, index,
                                              params.correspondence_distance);
            if (!corrs_cand.empty()) {
                obj_cand = evaluate(corrs_cand, t_cand);
                if (obj_cand <= objective + 1e-12 * std::max(1.0, objective)) {
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if (!accepted) {
            result.converged = true;  // stationary: no decreasing step exists
            break;
        }
        t = t_cand;
        corrs = std::move(corrs_cand);
        result.objective_trace.push_back(obj_cand);
        result.iterations = iter + 1;
        const bool small_change =
            std::abs(objective - obj_cand) <= params.convergence_rel_change * std::max(objective, 1e-300);
        objective = obj_cand;
        if (small_change) {
            result.converged = true;
            break;
        }
    }

    result.transform = t;
    result.fitness = double(corrs.size()) / double(source.size());
    result.inlier_rmse = point_rmse(source, target, t, corrs);
    return result;
}

IcpResult colored_icp(const PointCloud& source, const PointCloud& target,
                      const IcpParams& params) {
    if (source.empty() || target.empty()) throw std::runtime_error("empty cloud");
    if (!source.has_colors() || !target.has_colors()) throw std::runtime_error("colors required");
    if (!target.has_normals()) throw std::runtime_error("normals required");
    if (params.delta < 0.0 || params.delta > 1.0)
        throw std::invalid_argument("icp: delta must be in [0,1]");
    if (params.correspondence_distance <= 0.0 || params.max_iterations < 1)
        throw std::invalid_argument("icp: bad parameters");

    const double delta = params.delta;
    const NeighborIndex index(target);
    const std::vector<double> src_intensity = intensities(source);
    const std::vector<double> tgt_intensity = intensities(target);
    const std::vector<Vec3> tgt_gradient =
        intensity_gradients(target, tgt_intensity, index, params.color_gradient_knn);

    RigidTransform t = params.seed_transform;

    auto photometric_residual = [&](const Vec3& p, std::size_t src_i, std::size_t tgt_i) {
        const Vec3& q = target.points[tgt_i];
        const Vec3& n = target.normals[tgt_i];
        const Vec3 proj = p - (p - q).dot(n) * n;
        return src_intensity[src_i] - (tgt_intensity[tgt_i] + tgt_gradient[tgt_i].dot(proj - q));
    };

    auto evaluate = [&](const std::vector<Correspondence>& corrs, const RigidTransform& tr) {
        double sum = 0.0;
        for (const auto& c : corrs) {
            const Vec3 p = tr.apply(source.points[c.src]);
            const double rg = (p - target.points[c.tgt]).dot(target.normals[c.tgt]);
            const double rc = photometric_residual(p, c.src, c.tgt);
            sum += delta * rg * rg + (1.0 - delta) * rc * rc;
        }
        return sum / double(corrs.size());
    };

    auto corrs = find_correspondences(source, t, index, params.correspondence_distance);
    if (corrs.empty()) throw std::runtime_error("registration diverged: no correspondences");

    IcpResult result;
    double objective = evaluate(corrs, t);
    result.objective_trace.push_back(objective);

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        if (corrs.size() < 6) throw std::runtime_error("degenerate geometry");
        Mat6 h = Mat6::Zero();
        Vec6 g = Vec6::Zero();
        for (const auto& c : corrs) {
            const Vec3 p = t.apply(source.points[c.src]);
            const Vec3& q = target.points[c.tgt];
            const Vec3& n = target.normals[c.tgt];

            const double rg = (p - q).dot(n);
            Vec6 jg;
            jg.head<3>() = p.cross(n);
            jg.tail<3>() = n;
            h += delta * (jg * jg.transpose());
            g += delta * (jg * rg);

            const double rc = photometric_residual(p, c.src, c.tgt);
            const Vec3& d = tgt_gradient[c.tgt];
            const Vec3 m = d - d.dot(n) * n;
            Vec6 jc;
            jc.head<3>() = -p.cross(m);
            jc.tail<3>() = -m;
            h += (1.0 - delta) * (jc * jc.transpose());
            g += (1.0 - delta) * (jc * rc);
        }
        Vec6 dx;
        if (!solve_damped(h, g, dx)) throw std::runtime_error("degenerate geometry");

        double scale = 1.0;
        bool accepted = false;
        RigidTransform t_cand;
        std::vector<Correspondence> corrs_cand;
        double obj_cand = objective;
        for (int attempt = 0; attempt < 12; ++attempt) {
            t_cand = apply_update(dx * scale, t);
            corrs_cand = find_correspondences(source, t_cand, index,
                                              params.correspondence_distance);
            if (!corrs_cand.empty()) {
                obj_cand = evaluate(corrs_cand, t_cand);
                if (obj_cand <= objective + 1e-12 * std::max(1.0, objective)) {
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if (!accepted) {
            result.converged = true;
            break;
        }
        t = t_cand;
        corrs = std::move(corrs_cand);
        result.objective_trace.push_back(obj_cand);
        result.iterations = iter + 1;
        const bool small_change =
            std::abs(objective - obj_cand) <= params.convergence_rel_change * std::max(objective, 1e-300);
        objective = obj_cand;
        if (small_change) {
            result.converged = true;
            break;
        }
    }

    result.transform = t;
    result.fitness = double(corrs.size()) / double(source.size());
    result.inlier_rmse = point_rmse(source, target, t, corrs);
    return result;
}

IcpResult register_session(const PointCloud& left_env, const PointCloud& right_env,
                           const RigGeometry& rig, IcpParams params) {
    if (left_env.empty() || right_env.empty()) throw std::runtime_error("empty cloud");
    params.seed_transform = seed_from_rig(rig);
    PointCloud target = left_env;
    if (!target.has_normals()) target = estimate_normals(target, std::size_t(params.normal_knn));

    const bool colored = target.has_colors() && right_env.has_colors();
    auto run = [&](const IcpParams& p) {
        return colored ? colored_icp(right_env, target, p)
                       : icp_point_to_plane(right_env, target, p);
    };
    IcpResult result = run(params);
    // a widened correspondence radius (poor rig seed) catches the basin but
    // drags in wrong pairs; re-run at the tight default from the coarse pose
    constexpr double kFineDistance = 0.05;
    if (params.correspondence_distance > kFineDistance + 1e-9) {
        IcpParams fine = params;
        fine.correspondence_distance = kFineDistance;
        fine.seed_transform = result.transform;
        result = run(fine);
    }
    return result;
}

}  // namespace duodepth
