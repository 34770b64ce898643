#include "sflow/field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sflow {

ImageField::ImageField(int w, int h, int c, double fill)
    : width(w), height(h), channels(c) {
    if (w < 0 || h < 0 || c < 0)
        throw std::invalid_argument("ImageField: negative extent");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

bool ImageField::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

SceneFlowState SceneFlowState::zeros(int w, int h) {
    SceneFlowState s;
    s.d1 = ImageField(w, h, 1);
    s.d2 = ImageField(w, h, 1);
    s.flow = ImageField(w, h, 2);
    s.dchange = ImageField(w, h, 1);
    return s;
}

bool SceneFlowState::consistent() const {
    return d1.channels == 1 && d2.channels == 1 && flow.channels == 2 &&
           dchange.channels == 1 && d1.same_extent(d2) && d1.same_extent(flow) &&
           d1.same_extent(dchange);
}

void SceneFlowState::clamp_disparities() {
    for (double& v : d1.data)
        if (v < 0.0) v = 0.0;
    for (double& v : d2.data)
        if (v < 0.0) v = 0.0;
}

ImageField pack_state(const SceneFlowState& state) {
    if (!state.consistent())
        throw std::invalid_argument("pack_state: inconsistent state extents");
    const int w = state.width(), h = state.height();
    ImageField out(w, h, kStateChannels);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::copy(state.d1.data.begin(), state.d1.data.end(), out.plane(kChanD1));
    std::copy(state.d2.data.begin(), state.d2.data.end(), out.plane(kChanD2));
    std::copy(state.flow.plane(0), state.flow.plane(0) + n, out.plane(kChanFx));
    std::copy(state.flow.plane(1), state.flow.plane(1) + n, out.plane(kChanFy));
    std::copy(state.dchange.data.begin(), state.dchange.data.end(), out.plane(kChanC));
    return out;
}

SceneFlowState unpack_state(const ImageField& field) {
    if (field.channels != kStateChannels)
        throw std::invalid_argument("unpack_state: expected 5 channels, got " +
                                    std::to_string(field.channels));
    SceneFlowState s = SceneFlowState::zeros(field.width, field.height);
    const std::size_t n = field.pixels();
    std::copy(field.plane(kChanD1), field.plane(kChanD1) + n, s.d1.data.begin());
    std::copy(field.plane(kChanD2), field.plane(kChanD2) + n, s.d2.data.begin());
    std::copy(field.plane(kChanFx), field.plane(kChanFx) + n, s.flow.plane(0));
    std::copy(field.plane(kChanFy), field.plane(kChanFy) + n, s.flow.plane(1));
    std::copy(field.plane(kChanC), field.plane(kChanC) + n, s.dchange.data.begin());
    s.clamp_disparities();
    return s;
}

GradientField GradientField::zeros(int w, int h) {
    GradientField g;
    g.d1 = ImageField(w, h, 1);
    g.d2 = ImageField(w, h, 1);
    g.flow = ImageField(w, h, 2);
    g.dchange = ImageField(w, h, 1);
    return g;
}

bool GradientField::all_finite() const {
    return d1.all_finite() && d2.all_finite() && flow.all_finite() &&
           dchange.all_finite();
}

ImageField pack_gradient(const GradientField& g) {
    const int w = g.width(), h = g.height();
    ImageField out(w, h, kStateChannels);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::copy(g.d1.data.begin(), g.d1.data.end(), out.plane(kChanD1));
    std::copy(g.d2.data.begin(), g.d2.data.end(), out.plane(kChanD2));
    std::copy(g.flow.plane(0), g.flow.plane(0) + n, out.plane(kChanFx));
    std::copy(g.flow.plane(1), g.flow.plane(1) + n, out.plane(kChanFy));
    std::copy(g.dchange.data.begin(), g.dchange.data.end(), out.plane(kChanC));
    return out;
}

}  // namespace sflow
