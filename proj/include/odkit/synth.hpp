// synth.hpp - planted 2-D scenarios for demos and end-to-end checks.
//
// Inliers form an anisotropic Gaussian cloud stretched along the first axis.
// Outliers are planted in one of two regimes:
//   far-bias      - far outside the cloud at a radius strictly beyond every
//                   inlier, spread over evenly spaced angular slots that are
//                   rotated away from the major axis; on the axis extension a
//                   narrow-bottleneck autoencoder extrapolates well and a
//                   planted point would stop being far in effect
//   near-low-bias - a tight cluster on the major-axis extension beyond the
//                   cloud's end, exactly where an autoencoder extrapolates, so
//                   it is reconstructed with low bias and plain reconstruction
//                   error under-ranks it, while the mean-shifted target is
//                   dragged back toward the cloud and exposes it
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "dataset.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace odkit {

enum class SynthPlacement { FarBias, NearLowBias };

inline std::string to_string(SynthPlacement p) {
    return p == SynthPlacement::FarBias ? "far-bias" : "near-low-bias";
}

inline SynthPlacement synth_placement_from_string(const std::string& s) {
    if (s == "far-bias") return SynthPlacement::FarBias;
    if (s == "near-low-bias") return SynthPlacement::NearLowBias;
    throw ConfigError("unknown placement '" + s + "' (expected far-bias or near-low-bias)");
}

struct SynthSpec {
    std::size_t inliers = 50;
    std::size_t outliers = 5;
    double sd_major = 2.0;  // inlier SD along the first axis
    double sd_minor = 0.2;  // inlier SD along the second axis
    SynthPlacement placement = SynthPlacement::FarBias;
    std::uint64_t seed = 1;

    // far-bias: outlier radius = far_margin * (furthest inlier radius) + 1;
    // slot i sits at angle 2*pi*(i+0.5)/outliers + pi/(2*outliers) - the
    // rotation keeps every slot pi/(2*outliers) away from the major axis.
    // far_jitter is the per-point angular jitter as a fraction (< 1) of that
    // clearance, so jittered points can never reach the axis
    double far_margin = 1.7;
    double far_jitter = 0.625;
    // near-low-bias: cluster center at (near_axis_pos * sd_major,
    // -near_perp_offset * sd_minor), with Gaussian jitter of near_jitter
    // times the per-axis SD
    double near_axis_pos = 7.5;
    double near_perp_offset = 0.0;
    double near_jitter = 0.15;
};

inline Dataset generate_synthetic(const SynthSpec& spec) {
    if (spec.inliers == 0 || spec.outliers == 0)
        throw ConfigError("generate_synthetic: inlier and outlier counts must be positive");
    if (spec.outliers >= spec.inliers)
        throw ConfigError("generate_synthetic: outliers must be a minority");
    if (!(spec.sd_major > 0.0) || !(spec.sd_minor > 0.0))
        throw ConfigError("generate_synthetic: SDs must be positive");
    if (spec.placement == SynthPlacement::FarBias &&
        (!(spec.far_jitter >= 0.0) || !(spec.far_jitter < 1.0)))
        throw ConfigError("generate_synthetic: far_jitter must be in [0, 1)");

    Rng rng(spec.seed);
    Dataset data;
    data.feature_names = {"x1", "x2"};
    data.values = Matrix(spec.inliers + spec.outliers, 2);
    data.labels.assign(spec.inliers + spec.outliers, 0);

    double max_radius = 0.0;
    for (std::size_t i = 0; i < spec.inliers; ++i) {
        const double x = rng.gaussian(0.0, spec.sd_major);
        const double y = rng.gaussian(0.0, spec.sd_minor);
        data.values(i, 0) = x;
        data.values(i, 1) = y;
        max_radius = std::max(max_radius, std::hypot(x, y));
    }
    for (std::size_t i = 0; i < spec.outliers; ++i) {
        const std::size_t row = spec.inliers + i;
        data.labels[row] = 1;
        if (spec.placement == SynthPlacement::FarBias) {
            const double r = spec.far_margin * max_radius + 1.0;
            const double slot = 2.0 * std::numbers::pi / static_cast<double>(spec.outliers);
            const double axis_gap = slot / 4.0;
            const double base = slot * (static_cast<double>(i) + 0.5) + axis_gap;
            const double jitter = spec.far_jitter * axis_gap;
            const double theta = base + rng.uniform(-jitter, jitter);
            data.values(row, 0) = r * std::cos(theta);
            data.values(row, 1) = r * std::sin(theta);
        } else {
            const double cx = spec.near_axis_pos * spec.sd_major;
            const double cy = -spec.near_perp_offset * spec.sd_minor;
            data.values(row, 0) = cx + spec.near_jitter * spec.sd_major * rng.gaussian();
            data.values(row, 1) = cy + spec.near_jitter * spec.sd_minor * rng.gaussian();
        }
    }
    return data;
}

}  // namespace odkit
