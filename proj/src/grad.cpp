#include "sflow/grad.hpp"

#include <stdexcept>

#include "loss_core.hpp"

namespace sflow {

std::pair<GradientField, LossBreakdown> consistency_gradient(
    const StereoClip& clip, const SceneFlowState& state, const LossWeights& weights,
    const PhotometricParams& photo, const OcclusionParams& occ) {
    detail::ConsistencyEval ev =
        detail::evaluate_consistency(clip, state, weights, photo, occ, true);
    return {std::move(ev.grad), std::move(ev.breakdown)};
}

namespace {

double loss_at(const StereoClip& clip, const SceneFlowState& state,
               const LossWeights& weights, const PhotometricParams& photo,
               const OcclusionParams& occ) {
    return total_loss(clip, state, weights, photo, occ).total;
}

}  // namespace

GradientField finite_difference_gradient(const StereoClip& clip,
                                         const SceneFlowState& state,
                                         const LossWeights& weights,
                                         const PhotometricParams& photo,
                                         const OcclusionParams& occ, double eps) {
    if (eps <= 0.0)
        throw std::invalid_argument("finite_difference_gradient: eps must be > 0");
    const int w = state.width(), h = state.height();
    GradientField g = GradientField::zeros(w, h);
    SceneFlowState probe = state;

    auto fd_plane = [&](ImageField& field, int channel, ImageField& out, int out_channel) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double saved = field.at(x, y, channel);
                field.at(x, y, channel) = saved + eps;
                const double lp = loss_at(clip, probe, weights, photo, occ);
                field.at(x, y, channel) = saved - eps;
                const double lm = loss_at(clip, probe, weights, photo, occ);
                field.at(x, y, channel) = saved;
                out.at(x, y, out_channel) = (lp - lm) / (2.0 * eps);
            }
        }
    };

    fd_plane(probe.d1, 0, g.d1, 0);
    fd_plane(probe.d2, 0, g.d2, 0);
    fd_plane(probe.flow, 0, g.flow, 0);
    fd_plane(probe.flow, 1, g.flow, 1);
    fd_plane(probe.dchange, 0, g.dchange, 0);
    return g;
}

}  // namespace sflow
