#include "duodepth/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "duodepth/ply_io.hpp"

namespace fs = std::filesystem;

namespace duodepth::synth {

namespace {

constexpr double kDigitGap = 0.004;       // digits sit just off the palm edge
constexpr double kHandPoseAngleDeg = 10;  // per-sample orientation wobble
constexpr double kHandPoseShift = 0.02;

Mat3 rotation_with_z(const Vec3& z_dir, const Vec3& up_hint = Vec3(0, 1, 0)) {
    const Vec3 z = z_dir.normalized();
    Vec3 y = up_hint - up_hint.dot(z) * z;
    if (y.norm() < 1e-6) y = Vec3(1, 0, 0) - z.x() * z;
    y.normalize();
    const Vec3 x = y.cross(z);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

Mat3 rotation_with_y(const Vec3& y_dir) {
    const Vec3 y = y_dir.normalized();
    const Vec3 ref = std::abs(y.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 x = y.cross(ref).normalized();
    const Vec3 z = x.cross(y);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

std::array<bool, 5> raised_mask(Gesture g) {
    switch (g) {
        case Gesture::Zero: return {false, false, false, false, false};
        case Gesture::One: return {false, true, false, false, false};
        case Gesture::Two: return {false, true, true, false, false};
        case Gesture::Three: return {false, true, true, true, false};
        case Gesture::Four: return {false, true, true, true, true};
        case Gesture::Five: return {true, true, true, true, true};
        case Gesture::Thumb: return {true, false, false, false, false};
        case Gesture::Ell: return {true, true, false, false, false};
        case Gesture::Bird: return {false, false, true, false, false};
        case Gesture::Frame: return {true, true, false, false, false};
    }
    return {};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Vec3 texture_color(const Primitive& prim, const Vec3& p) {
    switch (prim.texture) {
        case 1:  // environment panels: strong multi-directional gradients
            return {clamp01(0.55 + 0.35 * std::sin(9.0 * p.x() + 5.0 * p.y())),
                    clamp01(0.55 + 0.35 * std::sin(7.0 * p.y() + 4.0 * p.z() + 1.7)),
                    clamp01(0.55 + 0.35 * std::sin(8.0 * p.z() + 6.0 * p.x() + 3.1))};
        case 2:  // clothing
            return {clamp01(prim.base_color.x() * (1.0 + 0.12 * std::sin(25 * p.y() + 11 * p.x()))),
                    clamp01(prim.base_color.y() * (1.0 + 0.12 * std::sin(21 * p.y() + 9 * p.z()))),
                    clamp01(prim.base_color.z() * (1.0 + 0.12 * std::sin(23 * p.x() + 7 * p.z())))};
        default:  // skin with gentle positional variation
            return {clamp01(prim.base_color.x() * (1.0 + 0.08 * std::sin(55 * p.x() + 31 * p.z()))),
                    clamp01(prim.base_color.y() * (1.0 + 0.08 * std::sin(47 * p.y() + 29 * p.x() + 1.3))),
                    clamp01(prim.base_color.z() * (1.0 + 0.08 * std::sin(51 * p.z() + 23 * p.y() + 2.1)))};
    }
}

std::vector<Primitive> hand_primitives(const HandModel& model) {
    // primitive poses in the hand-local frame first
    std::vector<RigidTransform> local_poses;
    std::vector<Vec3> local_halves;

    local_poses.push_back(RigidTransform::identity());
    local_halves.push_back(model.palm_size / 2.0);

    const double palm_hx = model.palm_size.x() / 2.0;
    const double palm_hy = model.palm_size.y() / 2.0;
    const std::array<double, 5> slot_x = {0.0, 0.051, 0.017, -0.017, -0.051};
    for (int d = 0; d < 5; ++d) {
        if (!model.digits[std::size_t(d)].raised) continue;
        const Digit& digit = model.digits[std::size_t(d)];
        const Vec3 base = d == kThumb ? Vec3(-palm_hx - kDigitGap, 0, 0)
                                      : Vec3(slot_x[std::size_t(d)], palm_hy + kDigitGap, 0);
        RigidTransform t;
        t.rotation = rotation_with_y(digit.direction);
        t.translation = base + digit.direction.normalized() * (digit.length / 2.0);
        local_poses.push_back(t);
        local_halves.push_back(Vec3(digit.radius, digit.length / 2.0, digit.radius));
    }

    std::vector<Primitive> out;
    auto emit = [&](const RigidTransform& block_pose) {
        for (std::size_t i = 0; i < local_poses.size(); ++i) {
            Primitive prim;
            prim.kind = PrimKind::Box;
            prim.pose = compose(block_pose, local_poses[i]);
            prim.half_extents = local_halves[i];
            prim.label = 0;
            prim.texture = 0;
            out.push_back(prim);
        }
    };
    emit(model.pose);
    if (model.second_block) emit(compose(model.pose, model.second_offset));
    return out;
}

std::vector<Primitive> body_primitives(const Vec3& hand_center, const Vec3& view_bisector) {
    // far enough behind the hand that even a Frame-sized model keeps a
    // clear z gap to the slab's near edge in both cameras
    Primitive slab;
    slab.kind = PrimKind::Box;
    slab.pose.rotation = rotation_with_z(-view_bisector);  // faces the cameras
    slab.pose.translation = hand_center + 0.40 * view_bisector.normalized();
    slab.half_extents = Vec3(0.24, 0.21, 0.05);
    slab.label = 1;
    slab.texture = 2;
    slab.base_color = Vec3(0.45, 0.50, 0.62);
    return {slab};
}

std::vector<Primitive> environment_primitives() {
    std::vector<Primitive> out;
    auto panel = [&](const Vec3& center, const Vec3& halves, const Vec3& facing) {
        Primitive p;
        p.kind = PrimKind::Box;
        p.pose.rotation = rotation_with_z(facing);
        p.pose.translation = center;
        p.half_extents = halves;
        p.label = 2 + int(out.size());
        p.texture = 1;
        out.push_back(p);
    };
    // the rig looks up and forward from around the origin; give it walls,
    // a slanted ceiling panel and a few blocks with varied normals
    panel({0.0, 1.05, 0.50}, {0.80, 0.55, 0.03}, {0.0, -0.75, -0.66});
    panel({0.62, 0.60, 0.72}, {0.50, 0.42, 0.03}, {-0.55, -0.25, -0.80});
    panel({-0.58, 0.66, 0.66}, {0.45, 0.48, 0.03}, {0.58, -0.30, -0.76});
    panel({0.10, 0.50, 0.46}, {0.10, 0.10, 0.10}, {0.3, -0.4, -0.87});
    panel({-0.20, 0.42, 0.34}, {0.07, 0.07, 0.07}, {-0.2, -0.5, -0.84});

    Primitive ball;
    ball.kind = PrimKind::Sphere;
    ball.pose.translation = Vec3(0.27, 0.78, 0.55);
    ball.half_extents = Vec3::Constant(0.11);
    ball.label = 2 + int(out.size());
    ball.texture = 1;
    out.push_back(ball);
    return out;
}

SynthRig make_rig(const RigOptions& opt) {
    SynthRig rig;
    const Mat3 c_left = camera_mount_rotation(opt.yaw_deg / 2.0, opt.pitch_deg);
    const Mat3 c_right = camera_mount_rotation(-opt.yaw_deg / 2.0, opt.pitch_deg);
    const double pitch_rad = opt.pitch_deg * std::numbers::pi / 180.0;
    rig.hand_center = Vec3(0.0, opt.slant_distance * std::sin(pitch_rad), 0.0);

    auto place = [&](const Mat3& rot) {
        VirtualCamera cam;
        cam.cam_to_world.rotation = rot;
        cam.cam_to_world.translation = rig.hand_center - opt.slant_distance * (rot * Vec3::UnitZ());
        cam.focal = opt.focal;
        cam.width = opt.width;
        cam.height = opt.height;
        cam.depth_noise_std = opt.depth_noise_std;
        cam.depth_limit = opt.depth_limit;
        return cam;
    };
    rig.left = place(c_left);
    rig.right = place(c_right);

    rig.nominal.yaw_deg = opt.yaw_deg;
    rig.nominal.pitch_deg = opt.pitch_deg;
    rig.right_to_left =
        compose(rig.left.cam_to_world.inverse(), rig.right.cam_to_world);
    rig.nominal.baseline = rig.right_to_left.translation;
    return rig;
}

void perturb_rig(SynthRig& rig, Rng& rng, double rot_std_deg, double trans_std) {
    auto nudge = [&](VirtualCamera& cam) {
        Vec3 axis;
        do {
            axis = Vec3(rng.normal(), rng.normal(), rng.normal());
        } while (axis.norm() < 1e-9);
        const double angle = rng.normal(0.0, rot_std_deg) * std::numbers::pi / 180.0;
        cam.cam_to_world.rotation =
            axis_angle_rotation(axis.normalized(), angle) * cam.cam_to_world.rotation;
        cam.cam_to_world.translation +=
            Vec3(rng.normal(0, trans_std), rng.normal(0, trans_std), rng.normal(0, trans_std));
    };
    nudge(rig.left);
    nudge(rig.right);
    rig.right_to_left = compose(rig.left.cam_to_world.inverse(), rig.right.cam_to_world);
}

RigidTransform canonical_hand_pose(Facing facing, const SynthRig& rig) {
    // palm normal toward the faced target; the finger-spacing axis (local X)
    // rolls toward the other camera, so the off-axis view looks straight
    // down the knuckle line and the digits occlude each other
    Vec3 target;
    Vec3 epipolar;
    const Vec3& pos_l = rig.left.cam_to_world.translation;
    const Vec3& pos_r = rig.right.cam_to_world.translation;
    switch (facing) {
        case Facing::Left:
            target = pos_l;
            epipolar = pos_r - rig.hand_center;
            break;
        case Facing::Right:
            target = pos_r;
            epipolar = pos_l - rig.hand_center;
            break;
        case Facing::Neither:
            target = 0.5 * (pos_l + pos_r);
            epipolar = pos_r - pos_l;
            break;
    }
    // the knuckle axis takes the full 3D direction to the other camera so
    // that camera's rays run straight down the digit row; the palm normal
    // is the faced direction re-orthogonalized around it
    const Vec3 x = epipolar.normalized();
    const Vec3 z0 = (target - rig.hand_center).normalized();
    Vec3 z = z0 - z0.dot(x) * x;
    if (z.norm() < 1e-6) z = Vec3(0, 1, 0) - x.y() * x;
    z.normalize();
    RigidTransform pose;
    pose.rotation.col(0) = x;
    pose.rotation.col(1) = z.cross(x);
    pose.rotation.col(2) = z;
    // slight off-square tilt, as a held hand would have; also spreads the
    // palm face over more than one depth bin in the faced camera
    pose.rotation = axis_angle_rotation(x, 9.0 * std::numbers::pi / 180.0) * pose.rotation;
    // anchor the digit region (not the palm center) at the rig's aim point
    pose.translation = rig.hand_center - pose.rotation * Vec3(0, 0.07, 0);
    return pose;
}

HandModel build_hand(Gesture gesture, Facing facing, Rng& rng) {
    const SynthRig rig = make_rig();
    return build_hand(gesture, facing, rng, rig);
}

HandModel build_hand(Gesture gesture, Facing facing, Rng& rng, const SynthRig& rig) {
    HandModel m;
    m.gesture = gesture;
    m.facing = facing;
    const auto mask = raised_mask(gesture);
    for (int d = 0; d < 5; ++d) {
        m.digits[std::size_t(d)].raised = mask[std::size_t(d)];
        if (d == kThumb) {
            // on the -X side: tucked behind the palm from the off camera
            m.digits[std::size_t(d)].direction = Vec3(-1, 0, 0);
            m.digits[std::size_t(d)].length = 0.042;
        } else {
            m.digits[std::size_t(d)].direction = Vec3(0, 1, 0);
            m.digits[std::size_t(d)].length = 0.065;
        }
        m.digits[std::size_t(d)].radius = 0.009;
    }
    if (gesture == Gesture::Frame) {
        m.second_block = true;
        m.second_offset.rotation =
            axis_angle_rotation(Vec3::UnitZ(), std::numbers::pi);  // upside-down companion
        m.second_offset.translation = Vec3(0.025, 0.13, 0.0);
    }

    m.pose = canonical_hand_pose(facing, rig);
    Vec3 axis;
    do {
        axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (axis.norm() < 1e-9);
    const double angle =
        rng.uniform(-kHandPoseAngleDeg, kHandPoseAngleDeg) * std::numbers::pi / 180.0;
    m.pose.rotation = axis_angle_rotation(axis.normalized(), angle) * m.pose.rotation;
    m.pose.translation += Vec3(rng.uniform(-kHandPoseShift, kHandPoseShift),
                               rng.uniform(-kHandPoseShift, kHandPoseShift),
                               rng.uniform(-kHandPoseShift, kHandPoseShift));
    return m;
}

// ---------------------------------------------------------------------------
// Renderer

namespace {

struct PixelHit {
    double depth = std::numeric_limits<double>::infinity();
    Vec3 color = Vec3::Zero();
    int label = -1;
};

struct Splatter {
    const VirtualCamera& cam;
    RigidTransform world_to_cam;
    double cx, cy;
    std::vector<PixelHit>& buf;

    void splat(const Vec3& world, const Vec3& color, int label) {
        const Vec3 p = world_to_cam.apply(world);
        if (p.z() < 0.02) return;
        const long px = std::lround(cam.focal * p.x() / p.z() + cx);
        const long py = std::lround(cam.focal * p.y() / p.z() + cy);
        if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) return;
        PixelHit& hit = buf[std::size_t(py) * std::size_t(cam.width) + std::size_t(px)];
        if (p.z() < hit.depth) {
            hit.depth = p.z();
            hit.color = color;
            hit.label = label;
        }
    }

    double spacing_for(const Vec3& world_center) const {
        const double z = std::max(0.1, world_to_cam.apply(world_center).z());
        return std::max(0.0012, 0.45 * z / cam.focal);
    }
};

void splat_box(Splatter& sp, const Primitive& prim) {
    const double s = sp.spacing_for(prim.pose.translation);
    const Vec3& h = prim.half_extents;
    for (int axis = 0; axis < 3; ++axis) {
        const int b = (axis + 1) % 3, c = (axis + 2) % 3;
        const int nb = std::max(2, int(std::ceil(2 * h[b] / s)) + 1);
        const int nc = std::max(2, int(std::ceil(2 * h[c] / s)) + 1);
        for (int sign = -1; sign <= 1; sign += 2) {
            for (int i = 0; i < nb; ++i) {
                for (int j = 0; j < nc; ++j) {
                    Vec3 local;
                    local[axis] = sign * h[axis];
                    local[b] = -h[b] + 2 * h[b] * double(i) / double(nb - 1);
                    local[c] = -h[c] + 2 * h[c] * double(j) / double(nc - 1);
                    const Vec3 world = prim.pose.apply(local);
                    sp.splat(world, texture_color(prim, world), prim.label);
                }
            }
        }
    }
}

void splat_sphere(Splatter& sp, const Primitive& prim) {
    const double r = prim.half_extents.x();
    const double s = sp.spacing_for(prim.pose.translation);
    const int n_theta = std::max(8, int(std::ceil(std::numbers::pi * r / s)));
    for (int i = 0; i <= n_theta; ++i) {
        const double theta = std::numbers::pi * double(i) / double(n_theta);
        const double ring_r = r * std::sin(theta);
        const int n_phi = std::max(4, int(std::ceil(2 * std::numbers::pi * ring_r / s)));
        for (int j = 0; j < n_phi; ++j) {
            const double phi = 2 * std::numbers::pi * double(j) / double(n_phi);
            const Vec3 local(ring_r * std::cos(phi), r * std::cos(theta), ring_r * std::sin(phi));
            const Vec3 world = prim.pose.apply(local);
            sp.splat(world, texture_color(prim, world), prim.label);
        }
    }
}

}  // namespace

PointCloud render_scene(const std::vector<Primitive>& scene, const VirtualCamera& cam, Rng& rng,
                        std::vector<int>* labels) {
    std::vector<PixelHit> buf(std::size_t(cam.width) * std::size_t(cam.height));
    Splatter sp{cam, cam.cam_to_world.inverse(), (cam.width - 1) / 2.0, (cam.height - 1) / 2.0,
                buf};
    for (const auto& prim : scene) {
        if (prim.kind == PrimKind::Box) splat_box(sp, prim);
        else splat_sphere(sp, prim);
    }

    PointCloud cloud;
    if (labels) labels->clear();
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            const PixelHit& hit = buf[std::size_t(py) * std::size_t(cam.width) + std::size_t(px)];
            if (hit.label < 0) continue;
            const double z = hit.depth + rng.normal(0.0, cam.depth_noise_std);
            const Vec3 color(clamp01(hit.color.x() + rng.uniform(-0.01, 0.01)),
                             clamp01(hit.color.y() + rng.uniform(-0.01, 0.01)),
                             clamp01(hit.color.z() + rng.uniform(-0.01, 0.01)));
            if (z <= 1e-4) continue;
            if (cam.depth_limit > 0.0 && z > cam.depth_limit) continue;
            cloud.points.emplace_back((px - sp.cx) / cam.focal * z, (py - sp.cy) / cam.focal * z,
                                      z);
            cloud.colors.push_back(color);
            if (labels) labels->push_back(hit.label);
        }
    }
    return cloud;
}

PointCloud render_view(const HandModel& model, const VirtualCamera& cam, Rng& rng,
                       std::vector<int>* labels) {
    return render_scene(hand_primitives(model), cam, rng, labels);
}

std::pair<PointCloud, PointCloud> render_capture(const HandModel& model,
                                                 const VirtualCamera& left_cam,
                                                 const VirtualCamera& right_cam, bool add_body,
                                                 Rng& rng, std::vector<int>* left_labels,
                                                 std::vector<int>* right_labels) {
    std::vector<Primitive> scene = hand_primitives(model);
    if (add_body) {
        const Vec3 axis_l = left_cam.cam_to_world.rotation * Vec3::UnitZ();
        const Vec3 axis_r = right_cam.cam_to_world.rotation * Vec3::UnitZ();
        const Vec3 bisector = (axis_l + axis_r).normalized();
        for (auto& prim : body_primitives(model.pose.translation, bisector))
            scene.push_back(prim);
    }
    PointCloud left = render_scene(scene, left_cam, rng, left_labels);
    PointCloud right = render_scene(scene, right_cam, rng, right_labels);
    return {std::move(left), std::move(right)};
}

// ---------------------------------------------------------------------------
// Dataset generation

std::string session_env_path(const std::string& dataset_dir, const std::string& session_id,
                             bool left) {
    return (fs::path(dataset_dir) / "sessions" / session_id /
            (left ? "env_left.ply" : "env_right.ply"))
        .string();
}

RigGeometry load_rig_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    RigGeometry rig;
    rig.yaw_deg = j.at("yaw_deg").get<double>();
    rig.pitch_deg = j.at("pitch_deg").get<double>();
    const auto b = j.at("baseline");
    rig.baseline = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
    return rig;
}

void save_rig_json(const RigGeometry& rig, const std::string& path) {
    nlohmann::ordered_json j;
    j["yaw_deg"] = rig.yaw_deg;
    j["pitch_deg"] = rig.pitch_deg;
    j["baseline"] = {rig.baseline.x(), rig.baseline.y(), rig.baseline.z()};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest plan_dataset(const DatasetOptions& opt) {
    DatasetManifest manifest;
    int ordinal = 0;
    for (int g = 0; g < kNumGestures; ++g) {
        for (int f = 0; f < 3; ++f) {
            for (int k = 0; k < opt.captures_per_class_per_facing; ++k) {
                CaptureRecord r;
                char suffix[16];
                std::snprintf(suffix, sizeof(suffix), "%05d", k);
                r.gesture = Gesture(g);
                r.facing = Facing(f);
                r.capture_id = gesture_name(r.gesture) + "_" + facing_name(r.facing) + "_" + suffix;
                r.session_id = "s" + std::to_string(opt.sessions > 0 ? ordinal % opt.sessions : 0);
                r.left_path = "clouds/" + r.capture_id + "_left.ply";
                r.right_path = "clouds/" + r.capture_id + "_right.ply";
                manifest.records.push_back(std::move(r));
                ++ordinal;
            }
        }
    }
    assign_split(manifest, opt.seed);
    return manifest;
}

DatasetManifest build_dataset(const std::string& out_dir, const DatasetOptions& opt) {
    DatasetManifest manifest = plan_dataset(opt);
    fs::create_directories(fs::path(out_dir) / "clouds");

    Rng master(opt.seed);
    const int n_sessions = std::max(1, opt.sessions);
    std::vector<SynthRig> rigs;
    rigs.reserve(std::size_t(n_sessions));
    for (int s = 0; s < n_sessions; ++s) {
        SynthRig rig = make_rig(opt.rig);
        Rng srng = master.fork(0x5e550000ULL + std::uint64_t(s));
        perturb_rig(rig, srng);
        rigs.push_back(rig);

        const std::string sdir = (fs::path(out_dir) / "sessions" / ("s" + std::to_string(s))).string();
        fs::create_directories(sdir);
        const auto env = environment_primitives();
        PointCloud env_left = render_scene(env, rig.left.unlimited(), srng);
        PointCloud env_right = render_scene(env, rig.right.unlimited(), srng);
        write_ply(env_left, session_env_path(out_dir, "s" + std::to_string(s), true),
                  PlyFormat::BinaryLE, PlyPrecision::Float32);
        write_ply(env_right, session_env_path(out_dir, "s" + std::to_string(s), false),
                  PlyFormat::BinaryLE, PlyPrecision::Float32);

        nlohmann::ordered_json truth;
        truth["rotation"] = std::vector<double>(rig.right_to_left.rotation.data(),
                                                rig.right_to_left.rotation.data() + 9);
        truth["rotation_storage"] = "column_major";
        truth["translation"] = {rig.right_to_left.translation.x(),
                                rig.right_to_left.translation.y(),
                                rig.right_to_left.translation.z()};
        std::ofstream tf(fs::path(sdir) / "truth.json");
        tf << truth.dump(2) << "\n";
    }
    save_rig_json(rigs.front().nominal, (fs::path(out_dir) / "rig.json").string());

    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const CaptureRecord& r = manifest.records[i];
        const int session = int(i) % n_sessions;
        const SynthRig& rig = rigs[std::size_t(session)];
        Rng crng = master.fork(i);
        const HandModel model = build_hand(r.gesture, r.facing, crng, rig);
        auto [left, right] = render_capture(model, rig.left, rig.right, opt.add_body, crng);
        left.colors.clear();  // gesture RGB is not kept
        right.colors.clear();
        write_ply(left, (fs::path(out_dir) / r.left_path).string(), PlyFormat::BinaryLE,
                  PlyPrecision::Float32);
        write_ply(right, (fs::path(out_dir) / r.right_path).string(), PlyFormat::BinaryLE,
                  PlyPrecision::Float32);
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return manifest;
}

}  // namespace duodepth::synth
