#include "duodepth/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace duodepth {

ZDensityProfile z_density(const PointCloud& cloud, double bin_width, double min_prominence) {
    if (cloud.empty()) throw std::runtime_error("empty cloud");
    if (bin_width <= 0.0) throw std::invalid_argument("z_density: bin_width must be positive");

    ZDensityProfile profile;
    profile.bin_width = bin_width;
    profile.z_min = cloud.points.front().z();
    profile.z_max = profile.z_min;
    for (const auto& p : cloud.points) {
        profile.z_min = std::min(profile.z_min, p.z());
        profile.z_max = std::max(profile.z_max, p.z());
    }
    const double span = profile.z_max - profile.z_min;
    const int n_bins = std::max(1, int(std::ceil(span / bin_width - 1e-12)));
    profile.counts.assign(std::size_t(n_bins), 0);
    profile.bin_edges.resize(std::size_t(n_bins) + 1);
    for (int b = 0; b <= n_bins; ++b) profile.bin_edges[std::size_t(b)] = profile.z_min + b * bin_width;

    for (const auto& p : cloud.points) {
        int b = int((p.z() - profile.z_min) / bin_width);
        b = std::clamp(b, 0, n_bins - 1);
        ++profile.counts[std::size_t(b)];
    }
    profile.peaks = detect_peaks(profile, min_prominence);
    return profile;
}

std::vector<Peak> detect_peaks(const ZDensityProfile& profile, double min_prominence) {
    const auto& c = profile.counts;
    const int n = int(c.size());
    if (n == 0) return {};
    const std::size_t max_count = *std::max_element(c.begin(), c.end());
    if (max_count == 0) return {};
    const double threshold = min_prominence * double(max_count);

    // candidate local maxima; a plateau is one candidate at its left end
    std::vector<Peak> candidates;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && c[std::size_t(j + 1)] == c[std::size_t(i)]) ++j;
        const bool left_ok = (i == 0) || (c[std::size_t(i - 1)] < c[std::size_t(i)]);
        const bool right_ok = (j == n - 1) || (c[std::size_t(j + 1)] < c[std::size_t(i)]);
        if (left_ok && right_ok && c[std::size_t(i)] > 0)
            candidates.push_back({i, c[std::size_t(i)], 0.0});
        i = j + 1;
    }

    // topographic prominence: walk outward until strictly higher terrain or
    // the histogram edge, base = lowest count passed. A side with no bins
    // grounds at 0 (a lone spike keeps its full height), and a side that
    // ran off the edge without meeting higher terrain cannot raise the key
    // col above the other side's: a mode hugging the histogram boundary
    // keeps its prominence while a flat noisy profile stays peak-free.
    for (auto& peak : candidates) {
        const double h = double(peak.height);
        struct Walk {
            double low = 0.0;
            bool hit_higher = false;
            bool walked = false;
        };
        auto walk_side = [&](int step) {
            Walk w;
            for (int k = peak.bin + step; k >= 0 && k < n; k += step) {
                const double v = double(c[std::size_t(k)]);
                if (v > h) {
                    w.hit_higher = true;
                    break;
                }
                w.low = w.walked ? std::min(w.low, v) : v;
                w.walked = true;
            }
            return w;
        };
        const Walk left = walk_side(-1);
        const Walk right = walk_side(+1);
        const double raw_left = left.walked ? left.low : 0.0;
        const double raw_right = right.walked ? right.low : 0.0;
        const double base_left =
            (left.walked && !left.hit_higher) ? std::min(raw_left, raw_right) : raw_left;
        const double base_right =
            (right.walked && !right.hit_higher) ? std::min(raw_right, raw_left) : raw_right;
        peak.prominence = h - std::max(base_left, base_right);
    }

    std::vector<Peak> strong;
    for (const auto& p : candidates)
        if (p.prominence >= threshold) strong.push_back(p);

    // enforce >= 2 bin separation, keeping the higher peak
    std::sort(strong.begin(), strong.end(), [](const Peak& a, const Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.bin < b.bin;
    });
    std::vector<Peak> kept;
    for (const auto& p : strong) {
        bool blocked = false;
        for (const auto& q : kept)
            if (std::abs(p.bin - q.bin) < 2) blocked = true;
        if (!blocked) kept.push_back(p);
    }
    std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.bin < b.bin; });
    return kept;
}

namespace {

PointCloud select_points(const PointCloud& cloud, const std::vector<char>& keep) {
    PointCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!keep[i]) continue;
        out.points.push_back(cloud.points[i]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
        if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
    }
    return out;
}

}  // namespace

CropResult crop_to_arm(const PointCloud& cloud, double bin_width, double min_prominence,
                       double gap) {
    if (cloud.empty()) throw std::runtime_error("empty cloud");
    const ZDensityProfile profile = z_density(cloud, bin_width, min_prominence);

    CropResult result;
    if (profile.peaks.empty()) {
        result.cloud = cloud;
        result.no_peaks_warning = true;
        return result;
    }
    if (profile.peaks.size() == 1) {
        result.cloud = cloud;
        return result;
    }

    // valley = lowest-count bin strictly between the first two peaks
    const int p0 = profile.peaks[0].bin;
    const int p1 = profile.peaks[1].bin;
    int valley = p0 + 1;
    for (int b = p0 + 1; b < p1; ++b)
        if (profile.counts[std::size_t(b)] < profile.counts[std::size_t(valley)]) valley = b;
    const double z_cut = profile.bin_center(valley);

    // Z-contiguous clusters over sorted z
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cloud.points[a].z() < cloud.points[b].z();
    });

    std::vector<char> keep(cloud.size(), 1);
    std::size_t cluster_start = 0;
    auto flush_cluster = [&](std::size_t begin, std::size_t end) {
        // discard iff the whole cluster lies beyond the valley
        const double cluster_min_z = cloud.points[order[begin]].z();
        if (cluster_min_z > z_cut) {
            for (std::size_t i = begin; i < end; ++i) keep[order[i]] = 0;
        }
    };
    for (std::size_t i = 1; i < order.size(); ++i) {
        const double dz = cloud.points[order[i]].z() - cloud.points[order[i - 1]].z();
        if (dz > gap) {
            flush_cluster(cluster_start, i);
            cluster_start = i;
        }
    }
    flush_cluster(cluster_start, order.size());

    result.cloud = select_points(cloud, keep);
    result.removed = cloud.size() - result.cloud.size();
    return result;
}

PointCloud augment(const PointCloud& cloud, const AugmentParams& params) {
    if (params.alpha < 0 || params.beta < 0)
        throw std::invalid_argument("augment: alpha and beta must be non-negative");
    Rng rng(params.seed);
    const Vec3 shift(rng.normal(0.0, params.alpha), rng.normal(0.0, params.alpha),
                     rng.normal(0.0, params.alpha));
    PointCloud out = cloud;
    for (auto& p : out.points) {
        const Vec3 jitter(rng.normal(0.0, params.beta), rng.normal(0.0, params.beta),
                          rng.normal(0.0, params.beta));
        p += shift + jitter;
    }
    return out;
}

PointCloud rotate_random(const PointCloud& cloud, const RotationNoiseParams& params) {
    if (params.zeta_deg < 0) throw std::invalid_argument("rotate_random: zeta must be non-negative");
    Rng rng(params.seed);
    const double angle = rng.normal(0.0, params.zeta_deg) * std::numbers::pi / 180.0;
    Vec3 axis;
    do {
        axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (axis.norm() < 1e-9);
    axis.normalize();
    const Mat3 r = axis_angle_rotation(axis, angle);

    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud.points) centroid += p;
    if (!cloud.empty()) centroid /= double(cloud.size());

    PointCloud out = cloud;
    for (auto& p : out.points) p = centroid + r * (p - centroid);
    for (auto& n : out.normals) n = r * n;
    return out;
}

NormalizeResult normalize(const PointCloud& cloud) {
    if (cloud.empty()) throw std::runtime_error("degenerate cloud");
    NormalizeResult result;
    for (const auto& p : cloud.points) result.centroid += p;
    result.centroid /= double(cloud.size());

    double max_norm = 0.0;
    for (const auto& p : cloud.points) max_norm = std::max(max_norm, (p - result.centroid).norm());
    if (max_norm < 1e-15) throw std::runtime_error("degenerate cloud");
    result.scale = max_norm;

    result.cloud = cloud;
    for (auto& p : result.cloud.points) p = (p - result.centroid) / result.scale;
    return result;
}

PointCloud denormalize(const PointCloud& cloud, const Vec3& centroid, double scale) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = p * scale + centroid;
    return out;
}

}  // namespace duodepth
