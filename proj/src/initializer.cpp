#include "sflow/initializer.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sflow/warp.hpp"

namespace sflow {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// SAD between the patch at (cx,cy) in a and the patch at (cx+ox, cy+oy) in b,
// with replicated borders.
double sad_cost(const ImageField& a, const ImageField& b, int cx, int cy, double ox,
                double oy, int pr) {
    double cost = 0.0;
    for (int wy = -pr; wy <= pr; ++wy) {
        const int ay = clampi(cy + wy, 0, a.height - 1);
        const int by = clampi(cy + wy + static_cast<int>(oy), 0, b.height - 1);
        for (int wx = -pr; wx <= pr; ++wx) {
            const int ax = clampi(cx + wx, 0, a.width - 1);
            const int bx = clampi(cx + wx + static_cast<int>(ox), 0, b.width - 1);
            for (int c = 0; c < a.channels; ++c)
                cost += std::abs(a.at(ax, ay, c) - b.at(bx, by, c));
        }
    }
    return cost;
}

// parabola through (c0, c1, c2) at -1/0/+1; offset of the minimum, clamped.
// An exactly zero center cost is already a perfect match, leave it alone.
double parabolic_offset(double c0, double c1, double c2) {
    if (c1 == 0.0) return 0.0;
    const double curv = 0.5 * (c0 - 2.0 * c1 + c2);
    const double slope = 0.5 * (c2 - c0);
    if (curv <= 0.0 || curv < 0.5 * std::abs(slope)) return 0.0;
    double off = -0.5 * slope / curv;
    if (off < -0.5) off = -0.5;
    if (off > 0.5) off = 0.5;
    return off;
}

ImageField downsample2(const ImageField& img) {
    const int w2 = (img.width + 1) / 2, h2 = (img.height + 1) / 2;
    ImageField out(w2, h2, img.channels);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < h2; ++y) {
            for (int x = 0; x < w2; ++x) {
                double sum = 0.0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        sum += img.at(clampi(2 * x + dx, 0, img.width - 1),
                                      clampi(2 * y + dy, 0, img.height - 1), c);
                out.at(x, y, c) = 0.25 * sum;
            }
        }
    }
    return out;
}

ImageField match_flow_level(const ImageField& a, const ImageField& b, int radius,
                            int pr, const ImageField* prior) {
    ImageField flow(a.width, a.height, 2);
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            int px = 0, py = 0;
            if (prior) {
                // prior comes from the coarser level; sample and scale by 2
                SampleResult s = sample_bilinear(*prior, 0.5 * x, 0.5 * y);
                px = static_cast<int>(std::lround(2.0 * s.value[0]));
                py = static_cast<int>(std::lround(2.0 * s.value[1]));
            }
            double best = 0.0;
            int bx = 0, by = 0;
            bool first = true;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const double cost = sad_cost(a, b, x, y, px + dx, py + dy, pr);
                    if (first || cost < best) {
                        first = false;
                        best = cost;
                        bx = px + dx;
                        by = py + dy;
                    }
                }
            }
            const double cl = sad_cost(a, b, x, y, bx - 1, by, pr);
            const double cr = sad_cost(a, b, x, y, bx + 1, by, pr);
            const double cu = sad_cost(a, b, x, y, bx, by - 1, pr);
            const double cd = sad_cost(a, b, x, y, bx, by + 1, pr);
            flow.at(x, y, 0) = bx + parabolic_offset(cl, best, cr);
            flow.at(x, y, 1) = by + parabolic_offset(cu, best, cd);
        }
    }
    return flow;
}

}  // namespace

ImageField block_match_disparity(const ImageField& l, const ImageField& r,
                                 int max_disp, int patch) {
    if (!l.same_extent(r) || l.channels != r.channels)
        throw std::invalid_argument("block_match_disparity: extent mismatch");
    if (patch < 1 || patch % 2 == 0)
        throw std::invalid_argument("block_match_disparity: patch must be odd");
    const int pr = patch / 2;
    ImageField disp(l.width, l.height, 1);
    if (max_disp < 1) return disp;
    std::vector<double> cost(max_disp + 1);
    for (int y = 0; y < l.height; ++y) {
        for (int x = 0; x < l.width; ++x) {
            int best = 0;
            for (int d = 0; d <= max_disp; ++d) {
                cost[d] = sad_cost(l, r, x, y, -d, 0, pr);
                if (cost[d] < cost[best]) best = d;  // ties keep the smaller d
            }
            double out = best;
            if (best > 0 && best < max_disp)
                out += parabolic_offset(cost[best - 1], cost[best], cost[best + 1]);
            disp.at(x, y) = out;
        }
    }
    return disp;
}

ImageField block_match_flow(const ImageField& a, const ImageField& b, int radius,
                            int patch, int levels) {
    if (!a.same_extent(b) || a.channels != b.channels)
        throw std::invalid_argument("block_match_flow: extent mismatch");
    if (patch < 1 || patch % 2 == 0)
        throw std::invalid_argument("block_match_flow: patch must be odd");
    if (radius < 1)
        throw std::invalid_argument("block_match_flow: radius must be >= 1");
    if (levels < 1) levels = 1;

    std::vector<ImageField> pyr_a{a}, pyr_b{b};
    for (int k = 1; k < levels; ++k) {
        if (pyr_a.back().width < 2 * patch || pyr_a.back().height < 2 * patch) break;
        pyr_a.push_back(downsample2(pyr_a.back()));
        pyr_b.push_back(downsample2(pyr_b.back()));
    }

    const int pr = patch / 2;
    ImageField flow;
    for (int k = static_cast<int>(pyr_a.size()) - 1; k >= 0; --k) {
        const bool coarsest = k == static_cast<int>(pyr_a.size()) - 1;
        // full radius at the coarsest level, small refinement around the
        // upsampled prior at finer ones
        const int r = coarsest ? radius : 2;
        flow = match_flow_level(pyr_a[k], pyr_b[k], r, pr, coarsest ? nullptr : &flow);
    }
    return flow;
}

InitResult init_state(const StereoClip& clip, const InitConfig& config) {
    InitResult res;
    res.state = SceneFlowState::zeros(clip.width(), clip.height());
    res.state.d1 =
        block_match_disparity(clip.l1, clip.r1, config.max_disp, config.bm_patch);
    res.state.d2 =
        block_match_disparity(clip.l2, clip.r2, config.max_disp, config.bm_patch);
    res.state.flow = block_match_flow(clip.l1, clip.l2, config.flow_radius,
                                      config.flow_patch, config.pyramid_levels);
    res.backward_flow = block_match_flow(clip.l2, clip.l1, config.flow_radius,
                                         config.flow_patch, config.pyramid_levels);
    // C from the disparity closure; the refiner perturbs it freely later
    WarpResult d2_at_flow = warp_scalar_by_flow(res.state.d2, res.state.flow);
    for (int y = 0; y < clip.height(); ++y) {
        for (int x = 0; x < clip.width(); ++x) {
            double c = d2_at_flow.image.at(x, y) - res.state.d1.at(x, y);
            if (c > config.c_clamp) c = config.c_clamp;
            if (c < -config.c_clamp) c = -config.c_clamp;
            res.state.dchange.at(x, y) = c;
        }
    }
    res.state.clamp_disparities();
    return res;
}

}  // namespace sflow
