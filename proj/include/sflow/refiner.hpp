#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sflow/consistency.hpp"
#include "sflow/field.hpp"

namespace sflow {

// One 3x3 convolution layer, zero padding 1, stride 1.
// Weights are [out][in][ky][kx], row-major.
struct ConvLayer {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<double> w;
    std::vector<double> b;

    double& wt(int oc, int ic, int ky, int kx) {
        return w[((static_cast<std::size_t>(oc) * in_ch + ic) * 3 + ky) * 3 + kx];
    }
    double wt(int oc, int ic, int ky, int kx) const {
        return w[((static_cast<std::size_t>(oc) * in_ch + ic) * 3 + ky) * 3 + kx];
    }
    static ConvLayer zeros(int in_ch, int out_ch);
    std::size_t param_count() const { return w.size() + b.size(); }
};

constexpr int kRefinerInputChannels = 11;  // 5 state + 1 loss + 5 gradient

// Three conv layers (11 -> width -> width -> 5), ReLU after the first two.
struct RefinerParams {
    ConvLayer l1, l2, l3;

    int hidden_width() const { return l1.out_ch; }
    std::size_t param_count() const {
        return l1.param_count() + l2.param_count() + l3.param_count();
    }
    // Uniform fan-in init for the first two layers; the final layer starts at
    // zero so refinement begins as the identity.
    static RefinerParams init(int width, std::uint64_t seed);
    static RefinerParams zeros_like(const RefinerParams& p);
};

void save_refiner_params(const std::string& path, const RefinerParams& params);
RefinerParams load_refiner_params(const std::string& path);

// [5 state channels, 1 total-loss channel, 5 gradient channels]
ImageField refiner_input(const SceneFlowState& state, const ImageField& loss_map,
                         const GradientField& grad);

struct ForwardCache {
    ImageField h1, h2;  // post-ReLU activations
};

// delta = l3(relu(l2(relu(l1(input)))))
ImageField refiner_forward(const RefinerParams& params, const ImageField& input,
                           ForwardCache* cache = nullptr);

// Exact reverse pass; returns parameter gradients and the input gradient.
struct BackwardResult {
    RefinerParams grads;  // same shapes as params
    ImageField input_grad;
};
BackwardResult refiner_backward(const RefinerParams& params, const ImageField& input,
                                const ForwardCache& cache, const ImageField& upstream);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;  // one slot per parameter, declaration order
    long step = 0;
    AdamConfig config;

    static AdamState init(const RefinerParams& params, const AdamConfig& config);
};

// Bias-corrected Adam update in place.
void adam_step(RefinerParams& params, const RefinerParams& grads, AdamState& state);

struct RefineConfig {
    int steps = 5;
    LossWeights weights;
    PhotometricParams photo;
    OcclusionParams occ;
    // Scale applied to the gradient input channels so the feature is O(1) at
    // desk scale; 0 means W*H (the mean-loss gradient times the pixel count).
    double grad_feature_scale = 0.0;
};

struct RefineTrajectory {
    std::vector<SceneFlowState> states;     // X^0 .. X^T
    std::vector<LossBreakdown> breakdowns;  // per state
};

RefineTrajectory refine_iterate(const StereoClip& clip, const SceneFlowState& x0,
                                const RefinerParams& params, int steps,
                                const RefineConfig& config);

// Output finetuning baseline: X - lr * dL/dX, then the disparity clamp.
SceneFlowState descent_step(const StereoClip& clip, const SceneFlowState& state,
                            double lr, const RefineConfig& config,
                            LossBreakdown* breakdown = nullptr);

struct SupervisedLoss {
    double total = 0.0;
    double flow_term = 0.0, d1_term = 0.0, c_term = 0.0, d2_term = 0.0;
    long n_valid = 0;
};

// Mean over valid pixels of |F - F*|_2 + |d1 - d1*| + |c - c*|; the optional
// d2 term is off by default (it is not part of the supervised objective).
SupervisedLoss supervised_loss(const SceneFlowState& state, const SceneFlowState& gt,
                               const ImageField& valid, bool include_d2 = false);
GradientField supervised_gradient(const SceneFlowState& state, const SceneFlowState& gt,
                                  const ImageField& valid, bool include_d2 = false);

enum class TrainMode { Supervised, SelfSupervised };

struct TrainSample {
    StereoClip clip;
    SceneFlowState x0;
    SceneFlowState gt;     // may be empty in self-supervised mode
    ImageField gt_valid;   // may be empty
    bool has_gt = false;
};

struct TrainConfig {
    int steps = 5;
    int epochs = 3;
    int width = 32;
    TrainMode mode = TrainMode::Supervised;
    std::uint64_t seed = 1;
    bool sup_d2 = false;
    AdamConfig adam;
    LossWeights weights;
    PhotometricParams photo;
    OcclusionParams occ;
    double grad_feature_scale = 0.0;
};

struct TrainLog {
    std::vector<double> epoch_objective;  // mean per-clip sum_t L(X^t)
};

// Minimizes sum_{t=0..T} L(X^t) over the refiner weights, one Adam update per
// clip. Gradients are truncated per step: each step's loss trains the update
// that produced it, and the loss/gradient input channels are constant
// features. Throws on divergence (non-finite objective).
RefinerParams train_refiner(const std::vector<TrainSample>& dataset,
                            const TrainConfig& config, TrainLog* log = nullptr);

}  // namespace sflow
