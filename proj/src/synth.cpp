#include "sflow/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sflow/warp.hpp"

namespace sflow {

namespace {

// splitmix64; used to derive independent streams from (seed, index)
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x1234abcdULL));
}

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x853c49e6748fea9bULL) {}
    std::uint64_t next() {
        state = mix64(state);
        return state;
    }
    double uniform01() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    double gaussian() {
        // Box-Muller, one value per call for reproducibility
        double u1 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }
};

constexpr double kCurvatureBudget = 5e-4;  // sum amp*(2*pi*f)^2/8
constexpr double kAmplitudeBudget = 0.42;

}  // namespace

double SmoothTexture::value(double x, double y) const {
    double v = 0.5;
    for (const TextureComponent& c : components)
        v += c.amp * std::cos(2.0 * std::numbers::pi * (c.fx * x + c.fy * y) + c.phase);
    return v;
}

SmoothTexture make_texture(std::uint64_t seed, int n_components, double freq_min,
                           double freq_max) {
    Rng rng(seed);
    SmoothTexture tex;
    tex.components.resize(n_components);
    double curvature = 0.0, amplitude = 0.0;
    for (TextureComponent& c : tex.components) {
        const double f = rng.uniform(freq_min, freq_max);
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        c.fx = f * std::cos(theta);
        c.fy = f * std::sin(theta);
        c.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        c.amp = rng.uniform(0.5, 1.0) / (1.0 + (f / freq_min) * (f / freq_min));
        const double w2 = 2.0 * std::numbers::pi * f;
        curvature += c.amp * w2 * w2 / 8.0;
        amplitude += c.amp;
    }
    double scale = kAmplitudeBudget / amplitude;
    if (curvature * scale > kCurvatureBudget) scale = kCurvatureBudget / curvature;
    for (TextureComponent& c : tex.components) c.amp *= scale;
    return tex;
}

bool PlanarLayer::covers1(double x, double y) const {
    switch (shape) {
        case Shape::Full:
            return true;
        case Shape::Rect:
            return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
        case Shape::Ellipse: {
            const double nx = (x - cx) / rx, ny = (y - cy) / ry;
            return nx * nx + ny * ny <= 1.0;
        }
    }
    return false;
}

namespace {

void validate_spec(const SceneSpec& spec) {
    if (spec.width < 2 || spec.height < 2)
        throw std::invalid_argument("generate: scene extent too small");
    if (spec.layers.empty() || spec.layers.front().shape != PlanarLayer::Shape::Full)
        throw std::invalid_argument("generate: layers[0] must be a full background");
    const double margin_x = 8.0, margin_y = 4.0;
    for (const PlanarLayer& layer : spec.layers) {
        if (std::abs(1.0 - layer.a) < 0.5)
            throw std::invalid_argument("generate: disparity slope too steep in x");
        for (double x : {-margin_x, spec.width - 1 + margin_x})
            for (double y : {-margin_y, spec.height - 1 + margin_y})
                if (layer.disp1(x, y) < 0.0 || layer.disp2(x, y) < 0.0)
                    throw std::invalid_argument(
                        "generate: negative disparity region in spec");
    }
}

// index of the front-most (largest disparity) layer covering a left-view point
int top_layer_frame1(const SceneSpec& spec, double x, double y) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
        const PlanarLayer& l = spec.layers[i];
        if (!l.covers1(x, y)) continue;
        const double d = l.disp1(x, y);
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

int top_layer_frame2(const SceneSpec& spec, double x, double y) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
        const PlanarLayer& l = spec.layers[i];
        if (!l.covers1(x - l.motion_x, y - l.motion_y)) continue;
        const double d = l.disp2(x, y);
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

SyntheticSample generate(const SceneSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    SceneSpec scene = spec;  // local copy so we can fill texture seeds
    for (std::size_t i = 0; i < scene.layers.size(); ++i)
        if (scene.layers[i].texture_seed == 0)
            scene.layers[i].texture_seed = derive_seed(seed, i + 1);

    std::vector<SmoothTexture> textures(scene.layers.size());
    for (std::size_t i = 0; i < scene.layers.size(); ++i) {
        const PlanarLayer& l = scene.layers[i];
        textures[i] =
            make_texture(l.texture_seed, l.tex_components, l.tex_freq_min, l.tex_freq_max);
    }

    const int w = scene.width, h = scene.height;
    SyntheticSample s;
    s.clip.l1 = ImageField(w, h, 1);
    s.clip.r1 = ImageField(w, h, 1);
    s.clip.l2 = ImageField(w, h, 1);
    s.clip.r2 = ImageField(w, h, 1);
    s.clip.backward_flow = ImageField(w, h, 2);
    s.gt = SceneFlowState::zeros(w, h);
    s.occlusion.map = ImageField(w, h, 1);
    s.valid = ImageField(w, h, 1);
    s.occ_stereo1 = ImageField(w, h, 1);
    s.occ_stereo2 = ImageField(w, h, 1);

    std::vector<int> top1(static_cast<std::size_t>(w) * h);
    std::vector<int> top2(static_cast<std::size_t>(w) * h);
    std::vector<int> top_r1(static_cast<std::size_t>(w) * h);
    std::vector<int> top_r2(static_cast<std::size_t>(w) * h);

    // left views and ground truth on each frame's own grid
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const int l1 = top_layer_frame1(scene, x, y);
            top1[i] = l1;
            const PlanarLayer& a = scene.layers[l1];
            s.clip.l1.data[i] = textures[l1].value(x, y);
            s.gt.d1.data[i] = a.disp1(x, y);
            s.gt.flow.plane(0)[i] = a.motion_x;
            s.gt.flow.plane(1)[i] = a.motion_y;
            s.gt.dchange.data[i] = a.dchange;

            const int l2 = top_layer_frame2(scene, x, y);
            top2[i] = l2;
            const PlanarLayer& b = scene.layers[l2];
            s.clip.l2.data[i] = textures[l2].value(x - b.motion_x, y - b.motion_y);
            s.gt.d2.data[i] = b.disp2(x, y);
            s.clip.backward_flow.plane(0)[i] = -b.motion_x;
            s.clip.backward_flow.plane(1)[i] = -b.motion_y;
        }
    }

    // right views: among surface points projecting to q, the largest
    // disparity wins
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            int best1 = -1, best2 = -1;
            double bd1 = -1.0, bd2 = -1.0, v1 = 0.0, v2 = 0.0;
            for (int li = 0; li < static_cast<int>(scene.layers.size()); ++li) {
                const PlanarLayer& l = scene.layers[li];
                const double xs1 = (x + l.b * y + l.c) / (1.0 - l.a);
                if (l.covers1(xs1, y)) {
                    const double d = l.disp1(xs1, y);
                    if (d > bd1) {
                        bd1 = d;
                        best1 = li;
                        v1 = textures[li].value(xs1, y);
                    }
                }
                const double xs2 = (x + l.b * y + l.c2()) / (1.0 - l.a);
                if (l.covers1(xs2 - l.motion_x, y - l.motion_y)) {
                    const double d = l.disp2(xs2, y);
                    if (d > bd2) {
                        bd2 = d;
                        best2 = li;
                        v2 = textures[li].value(xs2 - l.motion_x, y - l.motion_y);
                    }
                }
            }
            top_r1[i] = best1;
            top_r2[i] = best2;
            s.clip.r1.data[i] = v1;
            s.clip.r2.data[i] = v2;
        }
    }

    // occlusion/validity: the four taps of each warp must stay on the same
    // surface for the correspondence to be exactly reconstructable
    auto taps_pure = [&](const std::vector<int>& top, double qx, double qy, int layer) {
        if (qx < 0.0 || qx > w - 1 || qy < 0.0 || qy > h - 1) return false;
        const BilinearCell cell = bilinear_cell(w, h, qx, qy);
        return top[static_cast<std::size_t>(cell.y0) * w + cell.x0] == layer &&
               top[static_cast<std::size_t>(cell.y0) * w + cell.x1] == layer &&
               top[static_cast<std::size_t>(cell.y1) * w + cell.x0] == layer &&
               top[static_cast<std::size_t>(cell.y1) * w + cell.x1] == layer;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const PlanarLayer& a = scene.layers[top1[i]];
            const double qx = x + a.motion_x, qy = y + a.motion_y;
            const bool inb = qx >= 0.0 && qx <= w - 1 && qy >= 0.0 && qy <= h - 1;
            s.valid.data[i] = inb ? 1.0 : 0.0;
            s.occlusion.map.data[i] = taps_pure(top2, qx, qy, top1[i]) ? 1.0 : 0.0;
            s.occ_stereo1.data[i] =
                taps_pure(top_r1, x - s.gt.d1.data[i], y, top1[i]) ? 1.0 : 0.0;
            s.occ_stereo2.data[i] =
                taps_pure(top_r2, x - s.gt.d2.data[i], y, top2[i]) ? 1.0 : 0.0;
        }
    }

    if (scene.sigma_img > 0.0) {
        Rng noise(derive_seed(seed, 7777));
        for (ImageField* img : {&s.clip.l1, &s.clip.r1, &s.clip.l2, &s.clip.r2})
            for (double& v : img->data) {
                v += scene.sigma_img * noise.gaussian();
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
            }
    }
    return s;
}

SceneSpec randomize_scene(const SceneRanges& r, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5ce9eULL));
    SceneSpec spec;
    spec.width = r.width;
    spec.height = r.height;
    spec.sigma_img = r.sigma_img;

    PlanarLayer bg;
    bg.shape = PlanarLayer::Shape::Full;
    bg.a = rng.uniform(-r.slope_max, r.slope_max);
    bg.b = rng.uniform(-r.slope_max, r.slope_max);
    const double slope_span =
        std::abs(bg.a) * (r.width + 16.0) + std::abs(bg.b) * (r.height + 8.0);
    bg.c = rng.uniform(r.disp_min + slope_span + r.dchange_max + 0.5, r.bg_disp_max);
    if (bg.c < r.disp_min + slope_span + r.dchange_max + 0.5)
        bg.c = r.disp_min + slope_span + r.dchange_max + 0.5;
    bg.motion_x = rng.uniform(-r.bg_flow_max_x, r.bg_flow_max_x);
    bg.motion_y = rng.uniform(-r.bg_flow_max_y, r.bg_flow_max_y);
    bg.dchange = rng.uniform(-0.5, 0.5);
    bg.texture_seed = derive_seed(seed, 100);
    spec.layers.push_back(bg);

    const int n_fg = rng.uniform_int(r.min_fg_layers, r.max_fg_layers);
    for (int k = 0; k < n_fg; ++k) {
        PlanarLayer fg;
        fg.shape = (rng.next() & 1) ? PlanarLayer::Shape::Rect
                                    : PlanarLayer::Shape::Ellipse;
        fg.cx = rng.uniform(0.25 * r.width, 0.75 * r.width);
        fg.cy = rng.uniform(0.3 * r.height, 0.7 * r.height);
        fg.rx = rng.uniform(0.12 * r.width, 0.25 * r.width);
        fg.ry = rng.uniform(0.12 * r.height, 0.28 * r.height);
        fg.a = rng.uniform(-r.slope_max, r.slope_max);
        fg.b = rng.uniform(-r.slope_max, r.slope_max);
        // 2x slope span keeps the foreground in front of the background over
        // the whole frame regardless of the drawn plane gradients
        fg.c = bg.c + rng.uniform(r.fg_gap_min, r.fg_gap_max) + 2.0 * slope_span;
        for (int attempt = 0; attempt < 64; ++attempt) {
            fg.motion_x = rng.uniform(-r.flow_max_x, r.flow_max_x);
            fg.motion_y = rng.uniform(-r.flow_max_y, r.flow_max_y);
            const double gap = std::abs(fg.motion_x - bg.motion_x) +
                               std::abs(fg.motion_y - bg.motion_y);
            if (gap >= r.min_motion_gap) break;
        }
        fg.dchange = rng.uniform(-r.dchange_max, r.dchange_max);
        fg.texture_seed = derive_seed(seed, 101 + k);
        spec.layers.push_back(fg);
    }
    return spec;
}

std::vector<SyntheticSample> make_dataset(int n, const SceneRanges& ranges,
                                          std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
    std::vector<SyntheticSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t si = derive_seed(seed, 1000 + static_cast<std::uint64_t>(i));
        out.push_back(generate(randomize_scene(ranges, si), si));
    }
    return out;
}

}  // namespace sflow
