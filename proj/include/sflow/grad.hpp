#pragma once

#include <utility>

#include "sflow/consistency.hpp"
#include "sflow/field.hpp"

namespace sflow {

// Exact reverse-mode gradient of the mean total consistency loss with
// respect to the five prediction channels. The occlusion mask, the Iverson
// bracket and the warp validity flags are held constant (they are
// re-evaluated each call but carry no gradient).
std::pair<GradientField, LossBreakdown> consistency_gradient(
    const StereoClip& clip, const SceneFlowState& state, const LossWeights& weights,
    const PhotometricParams& photo, const OcclusionParams& occ);

// Central-difference gradient of total_loss, channel by channel and pixel by
// pixel. Validation oracle for consistency_gradient; intended for small
// images only (cost: 10*W*H loss evaluations).
GradientField finite_difference_gradient(const StereoClip& clip,
                                         const SceneFlowState& state,
                                         const LossWeights& weights,
                                         const PhotometricParams& photo,
                                         const OcclusionParams& occ, double eps);

}  // namespace sflow
