#pragma once

#include <cstdint>
#include <vector>

#include "sflow/field.hpp"

namespace sflow {

// Band-limited texture: a sum of low-frequency sinusoids around 0.5. The
// component budget keeps the bilinear resampling error below ~5e-4 so warped
// renders agree with ground truth to well under 1e-3.
struct TextureComponent {
    double fx, fy;   // cycles per pixel
    double amp;
    double phase;
};

struct SmoothTexture {
    std::vector<TextureComponent> components;
    double value(double x, double y) const;
};

SmoothTexture make_texture(std::uint64_t seed, int n_components, double freq_min,
                           double freq_max);

// Textured plane with constant lateral motion and a per-frame disparity
// delta. Disparities are a*x + b*y + c in frame-1 left-view coordinates; the
// frame-2 plane follows from moving the layer and adding dchange.
struct PlanarLayer {
    double a = 0.0, b = 0.0, c = 4.0;
    double motion_x = 0.0, motion_y = 0.0;
    double dchange = 0.0;

    enum class Shape { Full, Rect, Ellipse };
    Shape shape = Shape::Full;
    double cx = 0.0, cy = 0.0, rx = 0.0, ry = 0.0;  // region, frame-1 coords

    std::uint64_t texture_seed = 0;
    int tex_components = 8;
    double tex_freq_min = 0.008;
    double tex_freq_max = 0.03;

    bool covers1(double x, double y) const;
    double disp1(double x, double y) const { return a * x + b * y + c; }
    // frame-2 plane: same gradient, offset moved with the layer plus dchange
    double c2() const { return c + dchange - a * motion_x - b * motion_y; }
    double disp2(double x, double y) const { return a * x + b * y + c2(); }
};

struct SceneSpec {
    int width = 128;
    int height = 96;
    std::vector<PlanarLayer> layers;  // layers[0] must cover the full frame
    double sigma_img = 0.0;           // additive image noise, 0 for oracle runs
};

// One clip with exact ground truth. occlusion marks pixels whose temporal
// correspondence is exactly reconstructable by bilinear sampling (all four
// taps of p+F land on the same surface); valid marks in-bounds warps.
// occ_stereo1/2 are the analogous masks for the two stereo warps.
struct SyntheticSample {
    StereoClip clip;  // backward_flow holds the exact F_{2->1}
    SceneFlowState gt;
    OcclusionMask occlusion;
    ImageField valid;
    ImageField occ_stereo1;
    ImageField occ_stereo2;
};

SyntheticSample generate(const SceneSpec& spec, std::uint64_t seed);

struct SceneRanges {
    int width = 128;
    int height = 96;
    int min_fg_layers = 1;
    int max_fg_layers = 2;
    double disp_min = 1.0;
    double disp_max = 32.0;
    double bg_disp_max = 5.5;
    double fg_gap_min = 2.0;
    double fg_gap_max = 8.0;
    double slope_max = 0.015;
    double flow_max_x = 5.0;
    double flow_max_y = 2.0;
    double bg_flow_max_x = 2.0;
    double bg_flow_max_y = 1.0;
    double min_motion_gap = 1.5;  // fg motion must differ from bg by this much
    double dchange_max = 1.5;
    double sigma_img = 0.0;
};

// Deterministic: sample i depends only on (seed, i).
std::vector<SyntheticSample> make_dataset(int n, const SceneRanges& ranges,
                                          std::uint64_t seed);

SceneSpec randomize_scene(const SceneRanges& ranges, std::uint64_t seed);

}  // namespace sflow
