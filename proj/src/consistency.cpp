#include "sflow/consistency.hpp"

#include <cmath>
#include <stdexcept>

#include "loss_core.hpp"
#include "sflow/warp.hpp"

namespace sflow {

ImageField photometric_error(const ImageField& a, const ImageField& b,
                             const PhotometricParams& params) {
    return detail::photometric_forward(a, b, params).pe;
}

ImageField stereo_loss(const ImageField& l, const ImageField& r,
                       const ImageField& disparity, const PhotometricParams& params) {
    if (!l.same_extent(r) || !l.same_extent(disparity))
        throw std::invalid_argument("stereo_loss: extent mismatch");
    WarpResult warped = warp_stereo(r, disparity);
    ImageField pe = photometric_error(l, warped.image, params);
    ImageField out(l.width, l.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = warped.validity.data[i] * pe.data[i];
    return out;
}

OcclusionMask occlusion_mask(const ImageField& f_fwd, const ImageField& f_bwd,
                             const OcclusionParams& params) {
    if (!f_fwd.same_extent(f_bwd) || f_fwd.channels != 2 || f_bwd.channels != 2)
        throw std::invalid_argument("occlusion_mask: expected matching 2-channel flows");
    if (params.w1 < 0.0 || params.w2 < 0.0)
        throw std::invalid_argument("occlusion_mask: w1 and w2 must be non-negative");
    WarpResult bwd = warp_scalar_by_flow(f_bwd, f_fwd);
    OcclusionMask mask;
    mask.map = ImageField(f_fwd.width, f_fwd.height, 1);
    for (int y = 0; y < f_fwd.height; ++y) {
        for (int x = 0; x < f_fwd.width; ++x) {
            const double fx = f_fwd.at(x, y, 0), fy = f_fwd.at(x, y, 1);
            const double bx = bwd.image.at(x, y, 0), by = bwd.image.at(x, y, 1);
            const double sum2 = (fx + bx) * (fx + bx) + (fy + by) * (fy + by);
            const double mag2 = fx * fx + fy * fy + bx * bx + by * by;
            mask.map.at(x, y) = sum2 < params.w1 * mag2 + params.w2 ? 1.0 : 0.0;
        }
    }
    return mask;
}

ImageField flow_loss(const ImageField& l1, const ImageField& l2,
                     const ImageField& flow, const OcclusionMask& mask,
                     const PhotometricParams& params) {
    if (!l1.same_extent(l2) || !l1.same_extent(flow) || !l1.same_extent(mask.map))
        throw std::invalid_argument("flow_loss: extent mismatch");
    WarpResult warped = warp_temporal(l2, flow);
    ImageField pe = photometric_error(l1, warped.image, params);
    ImageField out(l1.width, l1.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.map.data[i] * warped.validity.data[i] * pe.data[i];
    return out;
}

ImageField disparity_flow_loss(const SceneFlowState& state, const OcclusionMask& mask) {
    if (!state.consistent() || !state.d1.same_extent(mask.map))
        throw std::invalid_argument("disparity_flow_loss: extent mismatch");
    WarpResult warped = warp_scalar_by_flow(state.d2, state.flow);
    ImageField out(state.width(), state.height(), 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double residual =
            state.d1.data[i] + state.dchange.data[i] - warped.image.data[i];
        out.data[i] =
            mask.map.data[i] * warped.validity.data[i] * std::abs(residual);
    }
    return out;
}

ImageField smoothness_loss(const ImageField& field, const ImageField& guide) {
    return detail::smoothness_map(field, guide);
}

LossBreakdown total_loss(const StereoClip& clip, const SceneFlowState& state,
                         const LossWeights& weights, const PhotometricParams& photo,
                         const OcclusionParams& occ) {
    return detail::evaluate_consistency(clip, state, weights, photo, occ, false)
        .breakdown;
}

}  // namespace sflow
