#include "loss_core.hpp"

#include <cmath>
#include <stdexcept>

#include "sflow/warp.hpp"

namespace sflow::detail {

namespace {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_window(int window) {
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("ssim_window must be odd and >= 3");
}

}  // namespace

ImageField box_mean(const ImageField& img, int window) {
    check_window(window);
    const int r = window / 2;
    const int w = img.width, h = img.height;
    ImageField out(w, h, img.channels);
    for (int c = 0; c < img.channels; ++c) {
        const double* src = img.plane(c);
        double* dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            const int y0 = y - r < 0 ? 0 : y - r;
            const int y1 = y + r >= h ? h - 1 : y + r;
            for (int x = 0; x < w; ++x) {
                const int x0 = x - r < 0 ? 0 : x - r;
                const int x1 = x + r >= w ? w - 1 : x + r;
                double sum = 0.0;
                for (int yy = y0; yy <= y1; ++yy)
                    for (int xx = x0; xx <= x1; ++xx)
                        sum += src[static_cast<std::size_t>(yy) * w + xx];
                dst[static_cast<std::size_t>(y) * w + x] =
                    sum / ((y1 - y0 + 1) * (x1 - x0 + 1));
            }
        }
    }
    return out;
}

ImageField box_mean_transpose(const ImageField& g, int window) {
    check_window(window);
    const int r = window / 2;
    const int w = g.width, h = g.height;
    ImageField out(w, h, g.channels);
    for (int c = 0; c < g.channels; ++c) {
        const double* src = g.plane(c);
        double* dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            const int y0 = y - r < 0 ? 0 : y - r;
            const int y1 = y + r >= h ? h - 1 : y + r;
            for (int x = 0; x < w; ++x) {
                const int x0 = x - r < 0 ? 0 : x - r;
                const int x1 = x + r >= w ? w - 1 : x + r;
                double sum = 0.0;
                // each window mean that (x,y) participates in, scaled by that
                // window's own (border-truncated) count
                for (int yy = y0; yy <= y1; ++yy) {
                    const int wy0 = yy - r < 0 ? 0 : yy - r;
                    const int wy1 = yy + r >= h ? h - 1 : yy + r;
                    for (int xx = x0; xx <= x1; ++xx) {
                        const int wx0 = xx - r < 0 ? 0 : xx - r;
                        const int wx1 = xx + r >= w ? w - 1 : xx + r;
                        sum += src[static_cast<std::size_t>(yy) * w + xx] /
                               ((wy1 - wy0 + 1) * (wx1 - wx0 + 1));
                    }
                }
                dst[static_cast<std::size_t>(y) * w + x] = sum;
            }
        }
    }
    return out;
}

PhotoContext photometric_forward(const ImageField& a, const ImageField& b,
                                 const PhotometricParams& params) {
    if (!a.same_extent(b) || a.channels != b.channels)
        throw std::invalid_argument("photometric_error: extent/channel mismatch");
    check_window(params.ssim_window);
    PhotoContext ctx;
    ctx.a = &a;
    ctx.b = b;
    ctx.params = params;

    const int w = a.width, h = a.height, nc = a.channels;
    ImageField aa(w, h, nc), bb(w, h, nc), ab(w, h, nc);
    for (int c = 0; c < nc; ++c) {
        const double* pa = a.plane(c);
        const double* pb = b.plane(c);
        double* paa = aa.plane(c);
        double* pbb = bb.plane(c);
        double* pab = ab.plane(c);
        const std::size_t n = a.pixels();
        for (std::size_t i = 0; i < n; ++i) {
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
    }
    ctx.mu_a = box_mean(a, params.ssim_window);
    ctx.mu_b = box_mean(b, params.ssim_window);
    ctx.box_aa = box_mean(aa, params.ssim_window);
    ctx.box_bb = box_mean(bb, params.ssim_window);
    ctx.box_ab = box_mean(ab, params.ssim_window);

    ctx.pe = ImageField(w, h, 1);
    const double alpha = params.alpha_ssim;
    for (int c = 0; c < nc; ++c) {
        const double* pa = a.plane(c);
        const double* pb = b.plane(c);
        const double* ma = ctx.mu_a.plane(c);
        const double* mb = ctx.mu_b.plane(c);
        const double* baa = ctx.box_aa.plane(c);
        const double* bbb = ctx.box_bb.plane(c);
        const double* bab = ctx.box_ab.plane(c);
        double* pe = ctx.pe.plane(0);
        const std::size_t n = a.pixels();
        for (std::size_t i = 0; i < n; ++i) {
            const double sigma_a2 = baa[i] - ma[i] * ma[i];
            const double sigma_b2 = bbb[i] - mb[i] * mb[i];
            const double sigma_ab = bab[i] - ma[i] * mb[i];
            const double a1 = 2.0 * ma[i] * mb[i] + params.ssim_c1;
            const double a2 = 2.0 * sigma_ab + params.ssim_c2;
            const double b1 = ma[i] * ma[i] + mb[i] * mb[i] + params.ssim_c1;
            const double b2 = sigma_a2 + sigma_b2 + params.ssim_c2;
            const double ssim = (a1 * a2) / (b1 * b2);
            const double l1 = std::abs(pa[i] - pb[i]);
            pe[i] += (alpha * 0.5 * (1.0 - ssim) + (1.0 - alpha) * l1) / nc;
        }
    }
    return ctx;
}

ImageField photometric_backward(const PhotoContext& ctx, const ImageField& upstream) {
    const ImageField& a = *ctx.a;
    const int w = a.width, h = a.height, nc = a.channels;
    const double alpha = ctx.params.alpha_ssim;
    const std::size_t n = a.pixels();

    ImageField g_b(w, h, nc);
    // channel-shared upstream on box outputs
    ImageField gm(w, h, nc), gq(w, h, nc), gr(w, h, nc);
    for (int c = 0; c < nc; ++c) {
        const double* up = upstream.plane(0);
        const double* ma = ctx.mu_a.plane(c);
        const double* mb = ctx.mu_b.plane(c);
        const double* baa = ctx.box_aa.plane(c);
        const double* bbb = ctx.box_bb.plane(c);
        const double* bab = ctx.box_ab.plane(c);
        const double* pa = a.plane(c);
        const double* pb = ctx.b.plane(c);
        double* pgm = gm.plane(c);
        double* pgq = gq.plane(c);
        double* pgr = gr.plane(c);
        double* pgb = g_b.plane(c);
        for (std::size_t i = 0; i < n; ++i) {
            const double uc = up[i] / nc;
            // direct L1 part
            pgb[i] = uc * (1.0 - alpha) * (-sgn(pa[i] - pb[i]));
            // SSIM part, via the independent box outputs m=mu_b, q=box(bb), r=box(ab)
            const double sigma_a2 = baa[i] - ma[i] * ma[i];
            const double sigma_b2 = bbb[i] - mb[i] * mb[i];
            const double sigma_ab = bab[i] - ma[i] * mb[i];
            const double a1 = 2.0 * ma[i] * mb[i] + ctx.params.ssim_c1;
            const double a2 = 2.0 * sigma_ab + ctx.params.ssim_c2;
            const double b1 = ma[i] * ma[i] + mb[i] * mb[i] + ctx.params.ssim_c1;
            const double b2 = sigma_a2 + sigma_b2 + ctx.params.ssim_c2;
            const double ssim = (a1 * a2) / (b1 * b2);
            const double g_ssim = uc * (-alpha * 0.5);
            const double ds_dm = (2.0 * ma[i] * (a2 - a1)) / (b1 * b2) -
                                 ssim * (2.0 * mb[i] / b1) + ssim * (2.0 * mb[i] / b2);
            const double ds_dq = -ssim / b2;
            const double ds_dr = 2.0 * a1 / (b1 * b2);
            pgm[i] = g_ssim * ds_dm;
            pgq[i] = g_ssim * ds_dq;
            pgr[i] = g_ssim * ds_dr;
        }
    }
    const int win = ctx.params.ssim_window;
    ImageField tm = box_mean_transpose(gm, win);
    ImageField tq = box_mean_transpose(gq, win);
    ImageField tr = box_mean_transpose(gr, win);
    for (int c = 0; c < nc; ++c) {
        const double* pa = a.plane(c);
        const double* pb = ctx.b.plane(c);
        const double* ptm = tm.plane(c);
        const double* ptq = tq.plane(c);
        const double* ptr = tr.plane(c);
        double* pgb = g_b.plane(c);
        for (std::size_t i = 0; i < n; ++i)
            pgb[i] += ptm[i] + 2.0 * pb[i] * ptq[i] + pa[i] * ptr[i];
    }
    return g_b;
}

namespace {

// Smoothness forward map plus the exp(-|grad guide|) weights used by both
// directions of the pass.
struct SmoothTerm {
    ImageField map;  // 1 channel, channel-averaged
    ImageField wx, wy;
};

SmoothTerm smoothness_forward(const ImageField& field, const ImageField& guide) {
    if (!field.same_extent(guide))
        throw std::invalid_argument("smoothness_loss: extent mismatch");
    const int w = field.width, h = field.height;
    SmoothTerm t;
    t.map = ImageField(w, h, 1);
    t.wx = ImageField(w, h, 1);
    t.wy = ImageField(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int c = 0; c < guide.channels; ++c) {
                if (x + 1 < w) gx += std::abs(guide.at(x + 1, y, c) - guide.at(x, y, c));
                if (y + 1 < h) gy += std::abs(guide.at(x, y + 1, c) - guide.at(x, y, c));
            }
            t.wx.at(x, y) = std::exp(-gx / guide.channels);
            t.wy.at(x, y) = std::exp(-gy / guide.channels);
            double s = 0.0;
            for (int c = 0; c < field.channels; ++c) {
                if (x + 1 < w)
                    s += std::abs(field.at(x + 1, y, c) - field.at(x, y, c)) * t.wx.at(x, y);
                if (y + 1 < h)
                    s += std::abs(field.at(x, y + 1, c) - field.at(x, y, c)) * t.wy.at(x, y);
            }
            t.map.at(x, y) = s / field.channels;
        }
    }
    return t;
}

// accumulate d(upstream_scalar * mean(map)) / d field into g
void smoothness_backward(const ImageField& field, const SmoothTerm& t, double upstream,
                         ImageField& g) {
    const int w = field.width, h = field.height;
    const double scale = upstream / (field.pixels() * field.channels);
    for (int c = 0; c < field.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                if (x + 1 < w)
                    acc -= sgn(field.at(x + 1, y, c) - field.at(x, y, c)) * t.wx.at(x, y);
                if (x > 0)
                    acc += sgn(field.at(x, y, c) - field.at(x - 1, y, c)) * t.wx.at(x - 1, y);
                if (y + 1 < h)
                    acc -= sgn(field.at(x, y + 1, c) - field.at(x, y, c)) * t.wy.at(x, y);
                if (y > 0)
                    acc += sgn(field.at(x, y, c) - field.at(x, y - 1, c)) * t.wy.at(x, y - 1);
                g.at(x, y, c) += scale * acc;
            }
        }
    }
}

}  // namespace

ImageField smoothness_map(const ImageField& field, const ImageField& guide) {
    return smoothness_forward(field, guide).map;
}

namespace {

long count_nonzero(const ImageField& m) {
    long n = 0;
    for (double v : m.data)
        if (v != 0.0) ++n;
    return n;
}

double masked_mean(const ImageField& map, long n_valid) {
    if (n_valid == 0) return 0.0;
    double sum = 0.0;
    for (double v : map.data) sum += v;
    return sum / n_valid;
}

}  // namespace

ConsistencyEval evaluate_consistency(const StereoClip& clip, const SceneFlowState& state,
                                     const LossWeights& weights,
                                     const PhotometricParams& photo,
                                     const OcclusionParams& occ, bool with_grad) {
    if (!clip.has_backward_flow())
        throw std::invalid_argument(
            "total_loss: clip has no backward flow (required for the occlusion mask)");
    if (!state.consistent())
        throw std::invalid_argument("total_loss: inconsistent scene-flow state");
    if (!clip.l1.same_extent(state.d1) || !clip.l1.same_extent(clip.r1) ||
        !clip.l1.same_extent(clip.l2) || !clip.l1.same_extent(clip.r2) ||
        !clip.l1.same_extent(clip.backward_flow))
        throw std::invalid_argument("total_loss: clip/state extent mismatch");

    const int w = state.width(), h = state.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;

    ConsistencyEval ev;
    ev.mask = occlusion_mask(state.flow, clip.backward_flow, occ);

    // stereo photometric, both frames
    WarpDerivResult warp1 = warp_stereo_with_derivs(clip.r1, state.d1);
    WarpDerivResult warp2 = warp_stereo_with_derivs(clip.r2, state.d2);
    PhotoContext pe1 = photometric_forward(clip.l1, warp1.image, photo);
    PhotoContext pe2 = photometric_forward(clip.l2, warp2.image, photo);
    ImageField pd1_map(w, h, 1), pd2_map(w, h, 1);
    for (std::size_t i = 0; i < n; ++i) {
        pd1_map.data[i] = warp1.validity.data[i] * pe1.pe.data[i];
        pd2_map.data[i] = warp2.validity.data[i] * pe2.pe.data[i];
    }
    const long n_pd1 = count_nonzero(warp1.validity);
    const long n_pd2 = count_nonzero(warp2.validity);
    const double pd1 = masked_mean(pd1_map, n_pd1);
    const double pd2 = masked_mean(pd2_map, n_pd2);

    // flow photometric
    WarpDerivResult warpf = warp_temporal_with_derivs(clip.l2, state.flow);
    PhotoContext pef = photometric_forward(clip.l1, warpf.image, photo);
    ImageField pf_map(w, h, 1);
    for (std::size_t i = 0; i < n; ++i)
        pf_map.data[i] = ev.mask.map.data[i] * warpf.validity.data[i] * pef.pe.data[i];
    const long n_pf = count_nonzero(warpf.validity);
    const double pf = masked_mean(pf_map, n_pf);

    // disparity-flow consistency; shares the temporal warp's validity
    WarpDerivResult warpd2 = warp_temporal_with_derivs(state.d2, state.flow);
    ImageField residual(w, h, 1), df_map(w, h, 1);
    for (std::size_t i = 0; i < n; ++i) {
        residual.data[i] =
            state.d1.data[i] + state.dchange.data[i] - warpd2.image.data[i];
        df_map.data[i] = ev.mask.map.data[i] * warpd2.validity.data[i] *
                         std::abs(residual.data[i]);
    }
    const double df = masked_mean(df_map, n_pf);

    // edge-aware smoothness on all four prediction fields
    SmoothTerm sm_d1 = smoothness_forward(state.d1, clip.l1);
    SmoothTerm sm_d2 = smoothness_forward(state.d2, clip.l2);
    SmoothTerm sm_f = smoothness_forward(state.flow, clip.l1);
    SmoothTerm sm_c = smoothness_forward(state.dchange, clip.l1);
    ImageField smooth_map(w, h, 1);
    for (std::size_t i = 0; i < n; ++i)
        smooth_map.data[i] = sm_d1.map.data[i] + sm_d2.map.data[i] +
                             sm_f.map.data[i] + sm_c.map.data[i];
    const double smooth = masked_mean(smooth_map, static_cast<long>(n));

    LossBreakdown& bd = ev.breakdown;
    bd.weights = weights;
    bd.n_pd1 = n_pd1;
    bd.n_pd2 = n_pd2;
    bd.n_pf = n_pf;
    bd.pd_map = ImageField(w, h, 1);
    for (std::size_t i = 0; i < n; ++i)
        bd.pd_map.data[i] = 0.5 * (pd1_map.data[i] + pd2_map.data[i]);
    bd.pf_map = pf_map;
    bd.df_map = df_map;
    bd.smooth_map = smooth_map;
    bd.pd = 0.5 * (pd1 + pd2);
    bd.pf = pf;
    bd.df = df;
    bd.smooth = smooth;
    bd.total = weights.pd * bd.pd + weights.pf * bd.pf + weights.df * bd.df +
               weights.smooth * bd.smooth;
    bd.total_map = ImageField(w, h, 1);
    for (std::size_t i = 0; i < n; ++i)
        bd.total_map.data[i] = weights.pd * bd.pd_map.data[i] +
                               weights.pf * bd.pf_map.data[i] +
                               weights.df * bd.df_map.data[i] +
                               weights.smooth * bd.smooth_map.data[i];

    if (!with_grad) return ev;

    ev.grad = GradientField::zeros(w, h);

    // stereo terms -> d1, d2. The mask and validity decisions are constants.
    for (int frame = 0; frame < 2; ++frame) {
        const long nk = frame == 0 ? n_pd1 : n_pd2;
        if (nk == 0 || weights.pd == 0.0) continue;
        const WarpDerivResult& wd = frame == 0 ? warp1 : warp2;
        const PhotoContext& ctx = frame == 0 ? pe1 : pe2;
        ImageField& g_d = frame == 0 ? ev.grad.d1 : ev.grad.d2;
        ImageField upstream(w, h, 1);
        const double coeff = weights.pd * 0.5 / nk;
        for (std::size_t i = 0; i < n; ++i)
            upstream.data[i] = coeff * wd.validity.data[i];
        ImageField g_w = photometric_backward(ctx, upstream);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int c = 0; c < g_w.channels; ++c)
                acc += g_w.data[c * n + i] * (-wd.d_dx.data[c * n + i]);
            g_d.data[i] += acc;
        }
    }

    // flow photometric -> flow
    if (n_pf > 0 && weights.pf != 0.0) {
        ImageField upstream(w, h, 1);
        const double coeff = weights.pf / n_pf;
        for (std::size_t i = 0; i < n; ++i)
            upstream.data[i] = coeff * ev.mask.map.data[i] * warpf.validity.data[i];
        ImageField g_w = photometric_backward(pef, upstream);
        for (std::size_t i = 0; i < n; ++i) {
            double ax = 0.0, ay = 0.0;
            for (int c = 0; c < g_w.channels; ++c) {
                ax += g_w.data[c * n + i] * warpf.d_dx.data[c * n + i];
                ay += g_w.data[c * n + i] * warpf.d_dy.data[c * n + i];
            }
            ev.grad.flow.plane(0)[i] += ax;
            ev.grad.flow.plane(1)[i] += ay;
        }
    }

    // disparity-flow -> d1, dchange, flow directly; d2 via the transpose of
    // the bilinear gather
    if (n_pf > 0 && weights.df != 0.0) {
        const double coeff = weights.df / n_pf;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double u = coeff * ev.mask.map.data[i] *
                                 warpd2.validity.data[i] * sgn(residual.data[i]);
                if (u == 0.0) continue;
                ev.grad.d1.data[i] += u;
                ev.grad.dchange.data[i] += u;
                ev.grad.flow.plane(0)[i] += u * (-warpd2.d_dx.data[i]);
                ev.grad.flow.plane(1)[i] += u * (-warpd2.d_dy.data[i]);
                const BilinearCell cell = bilinear_cell(
                    w, h, x + state.flow.at(x, y, 0), y + state.flow.at(x, y, 1));
                const double w00 = (1.0 - cell.fx) * (1.0 - cell.fy);
                const double w10 = cell.fx * (1.0 - cell.fy);
                const double w01 = (1.0 - cell.fx) * cell.fy;
                const double w11 = cell.fx * cell.fy;
                ev.grad.d2.at(cell.x0, cell.y0) -= u * w00;
                ev.grad.d2.at(cell.x1, cell.y0) -= u * w10;
                ev.grad.d2.at(cell.x0, cell.y1) -= u * w01;
                ev.grad.d2.at(cell.x1, cell.y1) -= u * w11;
            }
        }
    }

    if (weights.smooth != 0.0) {
        smoothness_backward(state.d1, sm_d1, weights.smooth, ev.grad.d1);
        smoothness_backward(state.d2, sm_d2, weights.smooth, ev.grad.d2);
        smoothness_backward(state.flow, sm_f, weights.smooth, ev.grad.flow);
        smoothness_backward(state.dchange, sm_c, weights.smooth, ev.grad.dchange);
    }

    return ev;
}

}  // namespace sflow::detail
