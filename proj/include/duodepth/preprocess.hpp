#pragma once

#include <cstdint>
#include <vector>

#include "duodepth/geom.hpp"

namespace duodepth {

// Calibrated on the synthetic fixtures; overridable everywhere they are used.
constexpr double kDefaultBinWidth = 0.015;       // meters
constexpr double kDefaultMinProminence = 0.20;   // fraction of max bin count
constexpr double kDefaultClusterGap = 0.03;      // meters

struct Peak {
    int bin = 0;
    std::size_t height = 0;
    double prominence = 0.0;
};

// Binned point-count distribution along Z with detected peaks.
struct ZDensityProfile {
    double z_min = 0.0;
    double z_max = 0.0;
    double bin_width = 0.0;
    std::vector<double> bin_edges;      // counts.size() + 1 entries
    std::vector<std::size_t> counts;
    std::vector<Peak> peaks;

    double bin_center(int bin) const { return z_min + (double(bin) + 0.5) * bin_width; }
};

ZDensityProfile z_density(const PointCloud& cloud, double bin_width = kDefaultBinWidth,
                          double min_prominence = kDefaultMinProminence);

// Local maxima with topographic prominence >= min_prominence * max(counts),
// separated by at least 2 bins, sorted by bin index. Plateaus count once,
// at their leftmost bin.
std::vector<Peak> detect_peaks(const ZDensityProfile& profile, double min_prominence);

struct CropResult {
    PointCloud cloud;
    bool no_peaks_warning = false;
    std::size_t removed = 0;
};

// One peak: cloud passes through unchanged. Two or more: points are split
// into Z-contiguous clusters (gaps in sorted z larger than `gap` separate
// clusters) and every cluster lying entirely beyond the valley between the
// first two peaks is discarded. Zero peaks: unchanged, warning flag set.
CropResult crop_to_arm(const PointCloud& cloud, double bin_width = kDefaultBinWidth,
                       double min_prominence = kDefaultMinProminence,
                       double gap = kDefaultClusterGap);

struct AugmentParams {
    double alpha = 0.002;  // std of the whole-cloud translation, per axis
    double beta = 0.01;    // std of the per-point jitter, per axis
    std::uint64_t seed = 0;
};

// One translation vector drawn N(0, alpha) per axis for the whole cloud,
// plus independent per-point N(0, beta) jitter. Colors/normals untouched.
// Draw order: translation first, then jitter in point order (x, y, z).
PointCloud augment(const PointCloud& cloud, const AugmentParams& params);

struct RotationNoiseParams {
    double zeta_deg = 0.0;  // std of the rotation angle, degrees
    std::uint64_t seed = 0;
};

// Rotates about the cloud centroid by an angle drawn N(0, zeta) around a
// uniformly random unit axis. Normals rotate with the points.
PointCloud rotate_random(const PointCloud& cloud, const RotationNoiseParams& params);

struct NormalizeResult {
    PointCloud cloud;
    Vec3 centroid = Vec3::Zero();
    double scale = 1.0;  // max distance from centroid before scaling
};

// Centroid subtracted, scaled so the farthest point sits at distance 1.
NormalizeResult normalize(const PointCloud& cloud);
PointCloud denormalize(const PointCloud& cloud, const Vec3& centroid, double scale);

}  // namespace duodepth
