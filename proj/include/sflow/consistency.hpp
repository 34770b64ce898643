#pragma once

#include "sflow/field.hpp"

namespace sflow {

struct PhotometricParams {
    double alpha_ssim = 0.85;  // pe = alpha*(1-SSIM)/2 + (1-alpha)*|a-b|
    int ssim_window = 3;       // odd, >= 3
    double ssim_c1 = 1e-4;     // (0.01)^2 for [0,1] images
    double ssim_c2 = 9e-4;     // (0.03)^2
};

struct OcclusionParams {
    double w1 = 0.01;
    double w2 = 0.05;
};

struct LossWeights {
    double pd = 1.0;
    double pf = 1.0;
    double df = 1.0;
    double smooth = 0.1;
};

// Per-pixel maps are unweighted; the scalars are means over each term's
// in-bounds pixels, and total = pd_w*pd + pf_w*pf + df_w*df + s_w*smooth
// exactly. total_map is the weighted per-pixel sum fed to the refiner.
struct LossBreakdown {
    ImageField pd_map;     // average of the two stereo frames
    ImageField pf_map;
    ImageField df_map;
    ImageField smooth_map;  // all four smoothness fields summed
    ImageField total_map;   // 1 channel, weighted
    double pd = 0.0, pf = 0.0, df = 0.0, smooth = 0.0, total = 0.0;
    LossWeights weights;
    long n_pd1 = 0, n_pd2 = 0, n_pf = 0;  // in-bounds counts per term
};

// pe(p): channel-averaged weighted sum of (1-SSIM)/2 and |a-b|.
// SSIM uses box windows truncated at the image border.
ImageField photometric_error(const ImageField& a, const ImageField& b,
                             const PhotometricParams& params);

// L_pd(p) = validity(p) * pe(l(p), r(p - d(p))). Out-of-bounds samples
// contribute zero. Callers apply this to (L1,R1,D1) and (L2,R2,D2).
ImageField stereo_loss(const ImageField& l, const ImageField& r,
                       const ImageField& disparity, const PhotometricParams& params);

// Forward-backward check: mask(p) = 1 iff
//   |F_fwd(p) + B(p)|^2 < w1*(|F_fwd(p)|^2 + |B(p)|^2) + w2,
// with B the backward flow warped by the forward flow.
OcclusionMask occlusion_mask(const ImageField& f_fwd, const ImageField& f_bwd,
                             const OcclusionParams& params);

// L_pf(p) = mask(p) * validity(p) * pe(l1(p), l2(p + flow(p)))
ImageField flow_loss(const ImageField& l1, const ImageField& l2,
                     const ImageField& flow, const OcclusionMask& mask,
                     const PhotometricParams& params);

// L_df(p) = mask(p) * validity(p) * |d1(p) + c(p) - d2(p + flow(p))|
ImageField disparity_flow_loss(const SceneFlowState& state, const OcclusionMask& mask);

// Edge-aware first-order smoothness:
//   |dx field| * exp(-|dx guide|) + |dy field| * exp(-|dy guide|),
// channel-averaged, forward differences (zero at the last column/row).
ImageField smoothness_loss(const ImageField& field, const ImageField& guide);

// Assembles the weighted consistency loss over a clip. The occlusion mask is
// recomputed from the state's forward flow against the clip's fixed backward
// flow. Throws if the clip lacks a backward flow.
LossBreakdown total_loss(const StereoClip& clip, const SceneFlowState& state,
                         const LossWeights& weights, const PhotometricParams& photo,
                         const OcclusionParams& occ);

}  // namespace sflow
