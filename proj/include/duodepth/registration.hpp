#pragma once

#include <vector>

#include "duodepth/geom.hpp"

namespace duodepth {

struct IcpParams {
    int max_iterations = 50;
    double correspondence_distance = 0.05;  // meters
    double convergence_rel_change = 1e-6;
    double delta = 0.968;  // weight on the geometric term, in [0,1]
    RigidTransform seed_transform;
    int color_gradient_knn = 20;
    int normal_knn = 12;  // used by register_session when the target lacks normals
};

struct IcpResult {
    RigidTransform transform;
    double fitness = 0.0;      // fraction of source points with a correspondence
    double inlier_rmse = 0.0;  // Euclidean RMSE over final correspondences, meters
    std::vector<double> objective_trace;  // E(T) per iteration, including the seed
    bool converged = false;
    int iterations = 0;
};

// Two cameras: relative yaw between the optical axes, shared upward pitch,
// and the right camera origin expressed in the left camera frame.
struct RigGeometry {
    double yaw_deg = 90.0;
    double pitch_deg = 45.0;
    Vec3 baseline = Vec3::Zero();
};

// Camera-to-world rotation for a camera yawed about the world vertical and
// pitched upward about its own X axis. Camera frame: X right, Y up,
// Z forward along the optical axis.
Mat3 camera_mount_rotation(double yaw_deg, double pitch_deg);

// Closed-form transform mapping right-camera coordinates into the left
// camera frame for cameras mounted at +/- yaw/2 with a shared pitch.
RigidTransform seed_from_rig(const RigGeometry& rig);

// Gauss-Newton point-to-plane ICP (small-angle update, re-orthonormalized
// each step). Target must carry normals.
IcpResult icp_point_to_plane(const PointCloud& source, const PointCloud& target,
                             const IcpParams& params);

// Joint photometric + geometric objective  E(T) = (1-delta) E_C + delta E_G,
// with the target's intensity field linearized on each tangent plane.
// Both clouds must carry colors; target must carry normals.
IcpResult colored_icp(const PointCloud& source, const PointCloud& target,
                      const IcpParams& params);

// Registers one recording session: colored ICP on the depth-unlimited
// environment captures, seeded from the rig geometry. The right capture is
// the source, so the result maps right-camera points into the left frame.
// Target normals are estimated when missing; colorless captures fall back
// to the geometric objective.
IcpResult register_session(const PointCloud& left_env, const PointCloud& right_env,
                           const RigGeometry& rig, IcpParams params = {});

}  // namespace duodepth
