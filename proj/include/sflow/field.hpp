#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sflow {

// Dense H x W x C raster. Channel-planar: one row-major plane per channel.
// Images live in [0,1]; loss and gradient maps are unbounded.
struct ImageField {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    ImageField() = default;
    ImageField(int w, int h, int c, double fill = 0.0);

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(c) * height + y) * width + x;
    }
    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    bool empty() const { return data.empty(); }
    bool same_extent(const ImageField& o) const {
        return width == o.width && height == o.height;
    }
    bool all_finite() const;
};

// Fixed packing order of the five scene-flow channels.
enum StateChannel : int {
    kChanD1 = 0,
    kChanD2 = 1,
    kChanFx = 2,
    kChanFy = 3,
    kChanC = 4,
};
constexpr int kStateChannels = 5;

// Scene-flow prediction X: first/second-frame disparity, optical flow and
// disparity change. d2 is expressed on the second frame's own pixel grid.
struct SceneFlowState {
    ImageField d1;       // >= 0, pixels
    ImageField d2;       // >= 0, pixels, frame-2 grid
    ImageField flow;     // 2 channels (Fx, Fy), pixels
    ImageField dchange;  // signed, pixels

    int width() const { return d1.width; }
    int height() const { return d1.height; }

    static SceneFlowState zeros(int w, int h);
    bool consistent() const;
    // Negative disparities are physically meaningless; applied after every update.
    void clamp_disparities();
};

ImageField pack_state(const SceneFlowState& state);
SceneFlowState unpack_state(const ImageField& field);

// Result of the forward-backward flow check; 1 = check passed (non-occluded).
struct OcclusionMask {
    ImageField map;  // 1 channel, values in {0,1}

    int width() const { return map.width; }
    int height() const { return map.height; }
    bool at(int x, int y) const { return map.at(x, y, 0) != 0.0; }
};

// dL/dX with the same five-plane layout as SceneFlowState, unclamped.
struct GradientField {
    ImageField d1;
    ImageField d2;
    ImageField flow;     // 2 channels
    ImageField dchange;

    int width() const { return d1.width; }
    int height() const { return d1.height; }

    static GradientField zeros(int w, int h);
    bool all_finite() const;
};

ImageField pack_gradient(const GradientField& g);

// Two temporal stereo pairs plus the (fixed) backward flow F_{2->1} used by
// the occlusion check. The backward flow may be absent until an initializer
// or loader provides it.
struct StereoClip {
    ImageField l1, r1, l2, r2;
    ImageField backward_flow;  // 2 channels, empty if unavailable

    bool has_backward_flow() const { return !backward_flow.empty(); }
    int width() const { return l1.width; }
    int height() const { return l1.height; }
};

}  // namespace sflow
