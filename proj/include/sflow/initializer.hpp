#pragma once

#include "sflow/field.hpp"

namespace sflow {

struct InitConfig {
    int max_disp = 32;
    int bm_patch = 9;       // odd
    int flow_radius = 6;    // per pyramid level
    int flow_patch = 9;     // odd
    int pyramid_levels = 2;
    double c_clamp = 16.0;  // |dchange| bound for the derived C
};

// Per-pixel integer SAD search over d in [0, max_disp] with parabolic
// sub-pixel refinement; ties resolve to the smallest d. Convention:
// l(p) == r(p - d).
ImageField block_match_disparity(const ImageField& l, const ImageField& r,
                                 int max_disp, int patch);

// 2D integer SAD search with parabolic sub-pixel refinement per axis, run
// coarse-to-fine over `levels` pyramid levels. Ties resolve to the
// lexicographically smallest (dy, dx).
ImageField block_match_flow(const ImageField& a, const ImageField& b, int radius,
                            int patch, int levels = 2);

struct InitResult {
    SceneFlowState state;
    ImageField backward_flow;  // 2 channels, F_{2->1}
};

// Classical surrogate for the feedforward networks: block-matching disparity
// and flow, with C(p) = d2(p + F(p)) - d1(p) clamped to +-c_clamp.
InitResult init_state(const StereoClip& clip, const InitConfig& config);

}  // namespace sflow
