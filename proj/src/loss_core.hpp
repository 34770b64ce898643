#pragma once

// Shared forward/backward machinery behind total_loss and
// consistency_gradient. Both entry points go through evaluate_consistency so
// the loss values and the differentiated graph can never drift apart.

#include "sflow/consistency.hpp"
#include "sflow/field.hpp"

namespace sflow::detail {

// Cached intermediates of pe(a, b) needed for the reverse pass.
// All planes are per source channel.
struct PhotoContext {
    const ImageField* a = nullptr;  // reference image (constant)
    ImageField b;                   // warped image (variable)
    ImageField pe;                  // 1 channel, channel-averaged
    ImageField mu_a, mu_b;          // box means
    ImageField box_aa, box_bb, box_ab;
    PhotometricParams params;
};

PhotoContext photometric_forward(const ImageField& a, const ImageField& b,
                                 const PhotometricParams& params);

// d(sum_p upstream(p) * pe(p)) / d b, spread through the SSIM windows.
ImageField photometric_backward(const PhotoContext& ctx, const ImageField& upstream);

// Box mean over the (truncated) window and its transpose.
ImageField box_mean(const ImageField& img, int window);
ImageField box_mean_transpose(const ImageField& g, int window);

ImageField smoothness_map(const ImageField& field, const ImageField& guide);

struct ConsistencyEval {
    LossBreakdown breakdown;
    OcclusionMask mask;
    GradientField grad;  // populated only when with_grad
};

ConsistencyEval evaluate_consistency(const StereoClip& clip, const SceneFlowState& state,
                                     const LossWeights& weights,
                                     const PhotometricParams& photo,
                                     const OcclusionParams& occ, bool with_grad);

}  // namespace sflow::detail
