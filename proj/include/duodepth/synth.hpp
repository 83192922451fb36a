#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duodepth/geom.hpp"
#include "duodepth/manifest.hpp"
#include "duodepth/registration.hpp"

namespace duodepth::synth {

struct Digit {
    bool raised = false;
    Vec3 direction{0, 1, 0};  // hand-local
    double length = 0.065;
    double radius = 0.009;
};

// Cartoon hand: palm slab with detached digit boxes in the palm plane.
// Hand-local frame: +X thumb side, +Y finger direction, +Z palm normal.
struct HandModel {
    Vec3 palm_size{0.12, 0.09, 0.05};  // full extents
    std::array<Digit, 5> digits;        // thumb, index, middle, ring, pinky
    RigidTransform pose;                // hand-local -> world
    Gesture gesture = Gesture::Zero;
    Facing facing = Facing::Neither;
    bool second_block = false;      // mirrored companion hand (Frame)
    RigidTransform second_offset;   // companion pose, relative, hand-local
};
constexpr int kThumb = 0, kIndex = 1, kMiddle = 2, kRing = 3, kPinky = 4;

struct VirtualCamera {
    RigidTransform cam_to_world;
    double focal = 80.0;  // pixels
    int width = 96;
    int height = 96;
    double depth_noise_std = 0.001;  // meters
    double depth_limit = 0.75;       // meters; <= 0 means unlimited

    VirtualCamera unlimited() const {
        VirtualCamera c = *this;
        c.depth_limit = 0.0;
        return c;
    }
};

// Renderer primitives. Spheres use half_extents.x() as the radius.
enum class PrimKind { Box, Sphere };
struct Primitive {
    PrimKind kind = PrimKind::Box;
    RigidTransform pose;  // local -> world
    Vec3 half_extents{0.05, 0.05, 0.05};
    int label = 0;    // 0 hand, 1 body, >= 2 environment
    int texture = 0;  // procedural color field id
    Vec3 base_color{0.80, 0.62, 0.52};
};

// Deterministic color as a function of world position (views must agree).
Vec3 texture_color(const Primitive& prim, const Vec3& world_pos);

std::vector<Primitive> hand_primitives(const HandModel& model);
// Torso slab behind/above the hand along the mean view direction.
std::vector<Primitive> body_primitives(const Vec3& hand_center, const Vec3& view_bisector);
// Textured panels and blocks around the rig for registration captures.
std::vector<Primitive> environment_primitives();

struct RigOptions {
    double yaw_deg = 90.0;
    double pitch_deg = 45.0;
    double slant_distance = 0.38;  // camera-to-hand along the optical axis
    double focal = 80.0;
    int width = 96;
    int height = 96;
    double depth_noise_std = 0.001;
    double depth_limit = 0.75;  // keeps part of the torso in frame
};

struct SynthRig {
    VirtualCamera left, right;
    RigGeometry nominal;           // ideal mounting, for seeding registration
    RigidTransform right_to_left;  // ground truth for the placed cameras
    Vec3 hand_center = Vec3::Zero();
};

// Cameras yawed +/- yaw/2 about the world vertical, pitched up, both
// aimed at the hand point. The nominal geometry reproduces
// seed_from_rig(nominal) == right_to_left exactly for an unperturbed rig.
SynthRig make_rig(const RigOptions& opt = {});

// Small independent pose disturbances on both cameras (loose cables);
// right_to_left is recomputed, the nominal geometry is left alone.
void perturb_rig(SynthRig& rig, Rng& rng, double rot_std_deg = 0.2, double trans_std = 0.002);

// Hand model for one capture: class-fixed raised-digit mask, canonical
// orientation facing the requested camera (or the screen between them),
// plus a +/-10 degree / +/-0.02 m per-sample pose perturbation.
HandModel build_hand(Gesture gesture, Facing facing, Rng& rng);
HandModel build_hand(Gesture gesture, Facing facing, Rng& rng, const SynthRig& rig);
// The canonical (unperturbed) pose, for orientation statistics.
RigidTransform canonical_hand_pose(Facing facing, const SynthRig& rig);

// Splats primitive surfaces into a per-pixel depth buffer (nearest wins,
// which is what produces self-occlusion), back-projects covered pixels
// into the camera frame with Gaussian depth noise, drops points past the
// depth limit. `labels` receives each point's primitive label.
PointCloud render_scene(const std::vector<Primitive>& scene, const VirtualCamera& cam, Rng& rng,
                        std::vector<int>* labels = nullptr);

// Hand only; empty result means the model was out of view.
PointCloud render_view(const HandModel& model, const VirtualCamera& cam, Rng& rng,
                       std::vector<int>* labels = nullptr);

std::pair<PointCloud, PointCloud> render_capture(const HandModel& model,
                                                 const VirtualCamera& left_cam,
                                                 const VirtualCamera& right_cam, bool add_body,
                                                 Rng& rng,
                                                 std::vector<int>* left_labels = nullptr,
                                                 std::vector<int>* right_labels = nullptr);

struct DatasetOptions {
    int captures_per_class_per_facing = 67;  // 67 = desk scale, 335 = paper scale
    int sessions = 5;
    bool add_body = true;
    std::uint64_t seed = 0;
    RigOptions rig;
};

// Records and paths only, no rendering; build_dataset follows this plan.
DatasetManifest plan_dataset(const DatasetOptions& opt);

// Renders and writes every capture pair (xyz-only binary PLY), per-session
// depth-unlimited colored environment pairs, rig.json with the nominal
// geometry, per-session ground-truth transforms, and manifest.jsonl.
// Bitwise reproducible for a fixed seed.
DatasetManifest build_dataset(const std::string& out_dir, const DatasetOptions& opt);

// Session files live under <dataset dir>/sessions/<session_id>/.
std::string session_env_path(const std::string& dataset_dir, const std::string& session_id,
                             bool left);
RigGeometry load_rig_json(const std::string& path);
void save_rig_json(const RigGeometry& rig, const std::string& path);

}  // namespace duodepth::synth
