#include "sflow/refiner.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "sflow/grad.hpp"

namespace sflow {

ConvLayer ConvLayer::zeros(int in_ch, int out_ch) {
    ConvLayer l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.w.assign(static_cast<std::size_t>(in_ch) * out_ch * 9, 0.0);
    l.b.assign(out_ch, 0.0);
    return l;
}

namespace {

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

void fill_uniform_fan_in(ConvLayer& l, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_ch) * 9.0);
    for (double& w : l.w) w = (2.0 * uniform01(rng) - 1.0) * bound;
}

// out[oc] += conv(in, w[oc]) with zero padding 1
void conv_forward(const ConvLayer& layer, const ImageField& in, ImageField& out) {
    const int w = in.width, h = in.height;
    for (int oc = 0; oc < layer.out_ch; ++oc) {
        double* dst = out.plane(oc);
        const double bias = layer.b[oc];
        for (std::size_t i = 0; i < in.pixels(); ++i) dst[i] = bias;
        for (int ic = 0; ic < layer.in_ch; ++ic) {
            const double* src = in.plane(ic);
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = dy < 0 ? 1 : 0;
                const int y1 = dy > 0 ? h - 1 : h;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = dx < 0 ? 1 : 0;
                    const int x1 = dx > 0 ? w - 1 : w;
                    const double wt = layer.wt(oc, ic, ky, kx);
                    if (wt == 0.0) continue;
                    for (int y = y0; y < y1; ++y) {
                        double* d = dst + static_cast<std::size_t>(y) * w + x0;
                        const double* s =
                            src + static_cast<std::size_t>(y + dy) * w + (x0 + dx);
                        for (int x = x0; x < x1; ++x) *d++ += wt * *s++;
                    }
                }
            }
        }
    }
}

// transpose pass: gin[ic](p + k) += w * u[oc](p)
void conv_backward_input(const ConvLayer& layer, const ImageField& upstream,
                         ImageField& gin) {
    const int w = upstream.width, h = upstream.height;
    for (int oc = 0; oc < layer.out_ch; ++oc) {
        const double* u = upstream.plane(oc);
        for (int ic = 0; ic < layer.in_ch; ++ic) {
            double* g = gin.plane(ic);
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = dy < 0 ? 1 : 0;
                const int y1 = dy > 0 ? h - 1 : h;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = dx < 0 ? 1 : 0;
                    const int x1 = dx > 0 ? w - 1 : w;
                    const double wt = layer.wt(oc, ic, ky, kx);
                    if (wt == 0.0) continue;
                    for (int y = y0; y < y1; ++y) {
                        const double* s = u + static_cast<std::size_t>(y) * w + x0;
                        double* d = g + static_cast<std::size_t>(y + dy) * w + (x0 + dx);
                        for (int x = x0; x < x1; ++x) *d++ += wt * *s++;
                    }
                }
            }
        }
    }
}

void conv_backward_params(const ConvLayer& layer, const ImageField& in,
                          const ImageField& upstream, ConvLayer& grads) {
    const int w = in.width, h = in.height;
    for (int oc = 0; oc < layer.out_ch; ++oc) {
        const double* u = upstream.plane(oc);
        double bsum = 0.0;
        for (std::size_t i = 0; i < in.pixels(); ++i) bsum += u[i];
        grads.b[oc] += bsum;
        for (int ic = 0; ic < layer.in_ch; ++ic) {
            const double* src = in.plane(ic);
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = dy < 0 ? 1 : 0;
                const int y1 = dy > 0 ? h - 1 : h;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = dx < 0 ? 1 : 0;
                    const int x1 = dx > 0 ? w - 1 : w;
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* uu = u + static_cast<std::size_t>(y) * w + x0;
                        const double* ss =
                            src + static_cast<std::size_t>(y + dy) * w + (x0 + dx);
                        for (int x = x0; x < x1; ++x) acc += *uu++ * *ss++;
                    }
                    grads.wt(oc, ic, ky, kx) += acc;
                }
            }
        }
    }
}

void relu_inplace(ImageField& f) {
    for (double& v : f.data)
        if (v < 0.0) v = 0.0;
}

}  // namespace

RefinerParams RefinerParams::init(int width, std::uint64_t seed) {
    if (width < 1) throw std::invalid_argument("RefinerParams: width must be >= 1");
    RefinerParams p;
    p.l1 = ConvLayer::zeros(kRefinerInputChannels, width);
    p.l2 = ConvLayer::zeros(width, width);
    p.l3 = ConvLayer::zeros(width, kStateChannels);
    std::mt19937_64 rng(seed ^ 0x5f1e9a3cull);
    fill_uniform_fan_in(p.l1, rng);
    fill_uniform_fan_in(p.l2, rng);
    // l3 stays zero: the first refinement step is the identity
    return p;
}

RefinerParams RefinerParams::zeros_like(const RefinerParams& p) {
    RefinerParams z;
    z.l1 = ConvLayer::zeros(p.l1.in_ch, p.l1.out_ch);
    z.l2 = ConvLayer::zeros(p.l2.in_ch, p.l2.out_ch);
    z.l3 = ConvLayer::zeros(p.l3.in_ch, p.l3.out_ch);
    return z;
}

ImageField refiner_input(const SceneFlowState& state, const ImageField& loss_map,
                         const GradientField& grad) {
    if (!state.consistent() || !state.d1.same_extent(loss_map) ||
        !state.d1.same_extent(grad.d1) || loss_map.channels != 1)
        throw std::invalid_argument("refiner_input: extent mismatch");
    const int w = state.width(), h = state.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    ImageField in(w, h, kRefinerInputChannels);
    ImageField packed_state = pack_state(state);
    ImageField packed_grad = pack_gradient(grad);
    std::copy(packed_state.data.begin(), packed_state.data.end(), in.data.begin());
    std::copy(loss_map.data.begin(), loss_map.data.end(), in.plane(kStateChannels));
    std::copy(packed_grad.data.begin(), packed_grad.data.end(),
              in.plane(kStateChannels + 1));
    return in;
}

ImageField refiner_forward(const RefinerParams& params, const ImageField& input,
                           ForwardCache* cache) {
    if (input.channels != params.l1.in_ch)
        throw std::invalid_argument("refiner_forward: input channel mismatch");
    const int w = input.width, h = input.height;
    ImageField h1(w, h, params.l1.out_ch);
    conv_forward(params.l1, input, h1);
    relu_inplace(h1);
    ImageField h2(w, h, params.l2.out_ch);
    conv_forward(params.l2, h1, h2);
    relu_inplace(h2);
    ImageField out(w, h, params.l3.out_ch);
    conv_forward(params.l3, h2, out);
    if (cache) {
        cache->h1 = std::move(h1);
        cache->h2 = std::move(h2);
    }
    return out;
}

BackwardResult refiner_backward(const RefinerParams& params, const ImageField& input,
                                const ForwardCache& cache, const ImageField& upstream) {
    if (upstream.channels != params.l3.out_ch)
        throw std::invalid_argument("refiner_backward: upstream channel mismatch");
    const int w = input.width, h = input.height;
    BackwardResult res;
    res.grads = RefinerParams::zeros_like(params);

    conv_backward_params(params.l3, cache.h2, upstream, res.grads.l3);
    ImageField u2(w, h, params.l2.out_ch);
    conv_backward_input(params.l3, upstream, u2);
    for (std::size_t i = 0; i < u2.data.size(); ++i)
        if (cache.h2.data[i] <= 0.0) u2.data[i] = 0.0;

    conv_backward_params(params.l2, cache.h1, u2, res.grads.l2);
    ImageField u1(w, h, params.l1.out_ch);
    conv_backward_input(params.l2, u2, u1);
    for (std::size_t i = 0; i < u1.data.size(); ++i)
        if (cache.h1.data[i] <= 0.0) u1.data[i] = 0.0;

    conv_backward_params(params.l1, input, u1, res.grads.l1);
    res.input_grad = ImageField(w, h, params.l1.in_ch);
    conv_backward_input(params.l1, u1, res.input_grad);
    return res;
}

AdamState AdamState::init(const RefinerParams& params, const AdamConfig& config) {
    AdamState s;
    s.m.assign(params.param_count(), 0.0);
    s.v.assign(params.param_count(), 0.0);
    s.step = 0;
    s.config = config;
    return s;
}

namespace {

template <typename Fn>
void for_each_param(RefinerParams& p, Fn&& fn) {
    std::size_t idx = 0;
    for (ConvLayer* l : {&p.l1, &p.l2, &p.l3}) {
        for (double& w : l->w) fn(idx++, w);
        for (double& b : l->b) fn(idx++, b);
    }
}

template <typename Fn>
void for_each_param_const(const RefinerParams& p, Fn&& fn) {
    std::size_t idx = 0;
    for (const ConvLayer* l : {&p.l1, &p.l2, &p.l3}) {
        for (const double& w : l->w) fn(idx++, w);
        for (const double& b : l->b) fn(idx++, b);
    }
}

}  // namespace

void adam_step(RefinerParams& params, const RefinerParams& grads, AdamState& state) {
    if (params.param_count() != grads.param_count() ||
        params.param_count() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    std::vector<double> flat_g(params.param_count());
    for_each_param_const(grads, [&](std::size_t i, const double& g) { flat_g[i] = g; });
    for_each_param(params, [&](std::size_t i, double& p) {
        const double g = flat_g[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        p -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    });
}

// ---------------------------------------------------------------------------
// parameter file: "SFRN", version, layer shapes, little-endian float32 payload

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, double v) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size())
        throw std::runtime_error("refiner params: truncated file");
    const unsigned char* p = reinterpret_cast<const unsigned char*>(in.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

double get_f32(const std::string& in, std::size_t& pos) {
    const std::uint32_t bits = get_u32(in, pos);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

constexpr std::uint32_t kParamsVersion = 1;

}  // namespace

void save_refiner_params(const std::string& path, const RefinerParams& params) {
    std::string out = "SFRN";
    put_u32(out, kParamsVersion);
    put_u32(out, 3);
    for (const ConvLayer* l : {&params.l1, &params.l2, &params.l3}) {
        put_u32(out, static_cast<std::uint32_t>(l->in_ch));
        put_u32(out, static_cast<std::uint32_t>(l->out_ch));
        put_u32(out, 3);
    }
    for (const ConvLayer* l : {&params.l1, &params.l2, &params.l3}) {
        for (double w : l->w) put_f32(out, w);
        for (double b : l->b) put_f32(out, b);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

RefinerParams load_refiner_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < 4 || in.compare(0, 4, "SFRN") != 0)
        throw std::runtime_error(path + ": not a refiner parameter file");
    std::size_t pos = 4;
    if (get_u32(in, pos) != kParamsVersion)
        throw std::runtime_error(path + ": unsupported version");
    if (get_u32(in, pos) != 3)
        throw std::runtime_error(path + ": unexpected layer count");
    int shapes[3][2];
    for (auto& shape : shapes) {
        shape[0] = static_cast<int>(get_u32(in, pos));
        shape[1] = static_cast<int>(get_u32(in, pos));
        if (get_u32(in, pos) != 3)
            throw std::runtime_error(path + ": unexpected kernel size");
    }
    RefinerParams p;
    p.l1 = ConvLayer::zeros(shapes[0][0], shapes[0][1]);
    p.l2 = ConvLayer::zeros(shapes[1][0], shapes[1][1]);
    p.l3 = ConvLayer::zeros(shapes[2][0], shapes[2][1]);
    if (p.l1.in_ch != kRefinerInputChannels || p.l3.out_ch != kStateChannels ||
        p.l2.in_ch != p.l1.out_ch || p.l3.in_ch != p.l2.out_ch)
        throw std::runtime_error(path + ": incompatible layer shapes");
    for (ConvLayer* l : {&p.l1, &p.l2, &p.l3}) {
        for (double& w : l->w) w = get_f32(in, pos);
        for (double& b : l->b) b = get_f32(in, pos);
    }
    if (pos != in.size()) throw std::runtime_error(path + ": trailing bytes");
    return p;
}

// ---------------------------------------------------------------------------

namespace {

double resolve_grad_scale(double configured, int w, int h) {
    return configured > 0.0 ? configured : static_cast<double>(w) * h;
}

GradientField scale_gradient(const GradientField& g, double s) {
    GradientField out = g;
    for (ImageField* f : {&out.d1, &out.d2, &out.flow, &out.dchange})
        for (double& v : f->data) v *= s;
    return out;
}

// X + delta with the disparity clamp; adds only nonzero updates so a zero
// delta reproduces the state bit for bit
SceneFlowState apply_update(const SceneFlowState& x, const ImageField& delta,
                            ImageField* clamp_active = nullptr) {
    SceneFlowState out = x;
    const std::size_t n = x.d1.pixels();
    if (clamp_active) *clamp_active = ImageField(x.width(), x.height(), kStateChannels);
    auto apply_plane = [&](ImageField& field, int field_ch, int state_ch, bool clamp) {
        double* v = field.plane(field_ch);
        const double* d = delta.plane(state_ch);
        for (std::size_t i = 0; i < n; ++i) {
            if (d[i] != 0.0) v[i] += d[i];
            if (clamp && v[i] < 0.0) {
                v[i] = 0.0;
                if (clamp_active) clamp_active->plane(state_ch)[i] = 1.0;
            }
        }
    };
    apply_plane(out.d1, 0, kChanD1, true);
    apply_plane(out.d2, 0, kChanD2, true);
    apply_plane(out.flow, 0, kChanFx, false);
    apply_plane(out.flow, 1, kChanFy, false);
    apply_plane(out.dchange, 0, kChanC, false);
    return out;
}

}  // namespace

RefineTrajectory refine_iterate(const StereoClip& clip, const SceneFlowState& x0,
                                const RefinerParams& params, int steps,
                                const RefineConfig& config) {
    if (steps < 1) throw std::invalid_argument("refine_iterate: steps must be >= 1");
    const double gscale =
        resolve_grad_scale(config.grad_feature_scale, x0.width(), x0.height());
    RefineTrajectory traj;
    traj.states.reserve(steps + 1);
    traj.breakdowns.reserve(steps + 1);
    traj.states.push_back(x0);
    SceneFlowState x = x0;
    for (int t = 0; t < steps; ++t) {
        auto [grad, bd] =
            consistency_gradient(clip, x, config.weights, config.photo, config.occ);
        traj.breakdowns.push_back(bd);
        const ImageField input =
            refiner_input(x, bd.total_map, scale_gradient(grad, gscale));
        const ImageField delta = refiner_forward(params, input);
        x = apply_update(x, delta);
        traj.states.push_back(x);
    }
    traj.breakdowns.push_back(
        total_loss(clip, x, config.weights, config.photo, config.occ));
    return traj;
}

SceneFlowState descent_step(const StereoClip& clip, const SceneFlowState& state,
                            double lr, const RefineConfig& config,
                            LossBreakdown* breakdown) {
    if (lr <= 0.0) throw std::invalid_argument("descent_step: lr must be > 0");
    auto [grad, bd] =
        consistency_gradient(clip, state, config.weights, config.photo, config.occ);
    if (breakdown) *breakdown = bd;
    SceneFlowState out = state;
    const std::size_t n = state.d1.pixels();
    auto step_plane = [&](ImageField& field, int fc, const ImageField& g, int gc) {
        double* v = field.plane(fc);
        const double* gv = g.plane(gc);
        for (std::size_t i = 0; i < n; ++i) v[i] -= lr * gv[i];
    };
    step_plane(out.d1, 0, grad.d1, 0);
    step_plane(out.d2, 0, grad.d2, 0);
    step_plane(out.flow, 0, grad.flow, 0);
    step_plane(out.flow, 1, grad.flow, 1);
    step_plane(out.dchange, 0, grad.dchange, 0);
    out.clamp_disparities();
    return out;
}

SupervisedLoss supervised_loss(const SceneFlowState& state, const SceneFlowState& gt,
                               const ImageField& valid, bool include_d2) {
    if (!state.d1.same_extent(gt.d1) || !state.d1.same_extent(valid))
        throw std::invalid_argument("supervised_loss: extent mismatch");
    SupervisedLoss out;
    const std::size_t n = state.d1.pixels();
    for (std::size_t i = 0; i < n; ++i) {
        if (valid.data[i] == 0.0) continue;
        ++out.n_valid;
        const double fx = state.flow.plane(0)[i] - gt.flow.plane(0)[i];
        const double fy = state.flow.plane(1)[i] - gt.flow.plane(1)[i];
        out.flow_term += std::sqrt(fx * fx + fy * fy);
        out.d1_term += std::abs(state.d1.data[i] - gt.d1.data[i]);
        out.c_term += std::abs(state.dchange.data[i] - gt.dchange.data[i]);
        if (include_d2) out.d2_term += std::abs(state.d2.data[i] - gt.d2.data[i]);
    }
    if (out.n_valid == 0) {
        std::fprintf(stderr, "supervised_loss: warning: no valid pixels\n");
        return out;
    }
    out.flow_term /= out.n_valid;
    out.d1_term /= out.n_valid;
    out.c_term /= out.n_valid;
    out.d2_term /= out.n_valid;
    out.total = out.flow_term + out.d1_term + out.c_term + out.d2_term;
    return out;
}

GradientField supervised_gradient(const SceneFlowState& state, const SceneFlowState& gt,
                                  const ImageField& valid, bool include_d2) {
    if (!state.d1.same_extent(gt.d1) || !state.d1.same_extent(valid))
        throw std::invalid_argument("supervised_gradient: extent mismatch");
    GradientField g = GradientField::zeros(state.width(), state.height());
    const std::size_t n = state.d1.pixels();
    long n_valid = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (valid.data[i] != 0.0) ++n_valid;
    if (n_valid == 0) return g;
    const double scale = 1.0 / n_valid;
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (std::size_t i = 0; i < n; ++i) {
        if (valid.data[i] == 0.0) continue;
        const double fx = state.flow.plane(0)[i] - gt.flow.plane(0)[i];
        const double fy = state.flow.plane(1)[i] - gt.flow.plane(1)[i];
        const double norm = std::sqrt(fx * fx + fy * fy);
        if (norm > 0.0) {
            g.flow.plane(0)[i] = scale * fx / norm;
            g.flow.plane(1)[i] = scale * fy / norm;
        }
        g.d1.data[i] = scale * sgn(state.d1.data[i] - gt.d1.data[i]);
        g.dchange.data[i] = scale * sgn(state.dchange.data[i] - gt.dchange.data[i]);
        if (include_d2)
            g.d2.data[i] = scale * sgn(state.d2.data[i] - gt.d2.data[i]);
    }
    return g;
}

namespace {

void accumulate(RefinerParams& acc, const RefinerParams& g) {
    ConvLayer* dst[3] = {&acc.l1, &acc.l2, &acc.l3};
    const ConvLayer* src[3] = {&g.l1, &g.l2, &g.l3};
    for (int k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < dst[k]->w.size(); ++i) dst[k]->w[i] += src[k]->w[i];
        for (std::size_t i = 0; i < dst[k]->b.size(); ++i) dst[k]->b[i] += src[k]->b[i];
    }
}

void mask_upstream(ImageField& upstream, const ImageField& clamp_active) {
    for (std::size_t i = 0; i < upstream.data.size(); ++i)
        if (clamp_active.data[i] != 0.0) upstream.data[i] = 0.0;
}

}  // namespace

RefinerParams train_refiner(const std::vector<TrainSample>& dataset,
                            const TrainConfig& config, TrainLog* log) {
    if (dataset.empty())
        throw std::invalid_argument("train_refiner: empty dataset");
    if (config.mode == TrainMode::Supervised)
        for (const TrainSample& s : dataset)
            if (!s.has_gt)
                throw std::invalid_argument(
                    "train_refiner: supervised mode needs ground truth");

    RefinerParams params = RefinerParams::init(config.width, config.seed);
    AdamState adam = AdamState::init(params, config.adam);
    const bool sup = config.mode == TrainMode::Supervised;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_obj = 0.0;
        for (const TrainSample& sample : dataset) {
            const double gscale = resolve_grad_scale(
                config.grad_feature_scale, sample.x0.width(), sample.x0.height());
            const ImageField ones(sample.x0.width(), sample.x0.height(), 1, 1.0);
            const ImageField& valid =
                sample.gt_valid.empty() ? ones : sample.gt_valid;

            RefinerParams grads = RefinerParams::zeros_like(params);
            SceneFlowState x = sample.x0;
            auto [g_in, bd_in] = consistency_gradient(sample.clip, x, config.weights,
                                                      config.photo, config.occ);
            double obj =
                sup ? supervised_loss(x, sample.gt, valid, config.sup_d2).total
                    : bd_in.total;
            for (int t = 0; t < config.steps; ++t) {
                const ImageField input =
                    refiner_input(x, bd_in.total_map, scale_gradient(g_in, gscale));
                ForwardCache cache;
                const ImageField delta = refiner_forward(params, input, &cache);
                ImageField clamp_active;
                SceneFlowState xn = apply_update(x, delta, &clamp_active);

                ImageField upstream;
                if (sup) {
                    obj += supervised_loss(xn, sample.gt, valid, config.sup_d2).total;
                    upstream = pack_gradient(
                        supervised_gradient(xn, sample.gt, valid, config.sup_d2));
                } else {
                    auto [g_next, bd_next] = consistency_gradient(
                        sample.clip, xn, config.weights, config.photo, config.occ);
                    obj += bd_next.total;
                    upstream = pack_gradient(g_next);
                    g_in = std::move(g_next);
                    bd_in = std::move(bd_next);
                }
                mask_upstream(upstream, clamp_active);
                BackwardResult back = refiner_backward(params, input, cache, upstream);
                accumulate(grads, back.grads);
                x = std::move(xn);
                if (sup && t + 1 < config.steps) {
                    auto [g2, bd2] = consistency_gradient(sample.clip, x, config.weights,
                                                          config.photo, config.occ);
                    g_in = std::move(g2);
                    bd_in = std::move(bd2);
                }
            }
            if (!std::isfinite(obj))
                throw std::runtime_error("train_refiner: objective diverged (non-finite)");
            epoch_obj += obj;
            adam_step(params, grads, adam);
        }
        if (log) log->epoch_objective.push_back(epoch_obj / dataset.size());
    }
    return params;
}

}  // namespace sflow
