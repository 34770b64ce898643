#pragma once

#include <utility>
#include <vector>

#include "sflow/field.hpp"

namespace sflow {

// Bilinear sample with the exact partials of the clamped interpolant.
// Derivatives at cell boundaries take the right-sided limit; outside the
// sample domain the clamped interpolant is constant, so the partials are 0.
struct SampleResult {
    std::vector<double> value;  // per channel
    std::vector<double> d_dx;   // per channel
    std::vector<double> d_dy;   // per channel
    bool in_bounds = false;     // query inside [0,W-1] x [0,H-1]
};

SampleResult sample_bilinear(const ImageField& img, double x, double y);

// The four taps and weights the sampler uses for a query; shared between
// interpolation and the transpose (scatter) pass of the gradient module.
struct BilinearCell {
    int x0, x1, y0, y1;
    double fx, fy;       // fractional position in the cell, in [0,1)
    bool in_bounds;
    bool clamped_x;      // query outside [0,W-1]: d/dx of interpolant is 0
    bool clamped_y;
};

BilinearCell bilinear_cell(int width, int height, double x, double y);

struct WarpResult {
    ImageField image;     // same channels as the source
    ImageField validity;  // 1 channel, 1 = query in bounds
};

// Like WarpResult but with the per-channel partials of each sample w.r.t.
// the query coordinates, for the gradient module.
struct WarpDerivResult {
    ImageField image;
    ImageField validity;
    ImageField d_dx;  // same channels as the source
    ImageField d_dy;
};

// Rectified stereo warp: output(p) = src_right(p_x - disparity(p), p_y).
WarpResult warp_stereo(const ImageField& src_right, const ImageField& disparity);
WarpDerivResult warp_stereo_with_derivs(const ImageField& src_right,
                                        const ImageField& disparity);

// Temporal warp: output(p) = src(p + flow(p)).
WarpResult warp_temporal(const ImageField& src, const ImageField& flow);
WarpDerivResult warp_temporal_with_derivs(const ImageField& src,
                                          const ImageField& flow);

// Same backward sampling applied to non-image fields (disparity, flow, ...).
WarpResult warp_scalar_by_flow(const ImageField& field, const ImageField& flow);

}  // namespace sflow
