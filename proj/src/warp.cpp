#include "sflow/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace sflow {

BilinearCell bilinear_cell(int width, int height, double x, double y) {
    BilinearCell c;
    c.in_bounds = x >= 0.0 && x <= width - 1 && y >= 0.0 && y <= height - 1;
    c.clamped_x = x < 0.0 || x > width - 1;
    c.clamped_y = y < 0.0 || y > height - 1;
    const double cx = c.clamped_x ? (x < 0.0 ? 0.0 : double(width - 1)) : x;
    const double cy = c.clamped_y ? (y < 0.0 ? 0.0 : double(height - 1)) : y;
    c.x0 = static_cast<int>(std::floor(cx));
    c.y0 = static_cast<int>(std::floor(cy));
    if (c.x0 > width - 1) c.x0 = width - 1;
    if (c.y0 > height - 1) c.y0 = height - 1;
    c.x1 = c.x0 + 1 < width ? c.x0 + 1 : width - 1;
    c.y1 = c.y0 + 1 < height ? c.y0 + 1 : height - 1;
    c.fx = cx - c.x0;
    c.fy = cy - c.y0;
    return c;
}

namespace {

// value/partials of one channel at a resolved cell
inline void sample_channel(const double* plane, int width, const BilinearCell& c,
                           double& value, double& ddx, double& ddy) {
    const double v00 = plane[static_cast<std::size_t>(c.y0) * width + c.x0];
    const double v10 = plane[static_cast<std::size_t>(c.y0) * width + c.x1];
    const double v01 = plane[static_cast<std::size_t>(c.y1) * width + c.x0];
    const double v11 = plane[static_cast<std::size_t>(c.y1) * width + c.x1];
    const double top = v00 + c.fx * (v10 - v00);
    const double bot = v01 + c.fx * (v11 - v01);
    value = top + c.fy * (bot - top);
    ddx = c.clamped_x ? 0.0 : (1.0 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    ddy = c.clamped_y ? 0.0 : (1.0 - c.fx) * (v01 - v00) + c.fx * (v11 - v10);
}

}  // namespace

SampleResult sample_bilinear(const ImageField& img, double x, double y) {
    if (img.empty())
        throw std::invalid_argument("sample_bilinear: empty image");
    const BilinearCell c = bilinear_cell(img.width, img.height, x, y);
    SampleResult r;
    r.in_bounds = c.in_bounds;
    r.value.resize(img.channels);
    r.d_dx.resize(img.channels);
    r.d_dy.resize(img.channels);
    for (int ch = 0; ch < img.channels; ++ch)
        sample_channel(img.plane(ch), img.width, c, r.value[ch], r.d_dx[ch], r.d_dy[ch]);
    return r;
}

namespace {

enum class QueryKind { Stereo, Flow };

template <bool WithDerivs>
void warp_impl(const ImageField& src, const ImageField& offsets, QueryKind kind,
               ImageField& out, ImageField& validity, ImageField* ddx, ImageField* ddy) {
    if (!src.same_extent(offsets))
        throw std::invalid_argument("warp: source/offset extent mismatch");
    if (kind == QueryKind::Stereo && offsets.channels != 1)
        throw std::invalid_argument("warp_stereo: disparity must be 1-channel");
    if (kind == QueryKind::Flow && offsets.channels != 2)
        throw std::invalid_argument("warp: flow must be 2-channel");
    const int w = src.width, h = src.height, nc = src.channels;
    out = ImageField(w, h, nc);
    validity = ImageField(w, h, 1);
    if (WithDerivs) {
        *ddx = ImageField(w, h, nc);
        *ddy = ImageField(w, h, nc);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double qx, qy;
            if (kind == QueryKind::Stereo) {
                qx = x - offsets.at(x, y, 0);
                qy = y;
            } else {
                qx = x + offsets.at(x, y, 0);
                qy = y + offsets.at(x, y, 1);
            }
            const BilinearCell c = bilinear_cell(w, h, qx, qy);
            validity.at(x, y) = c.in_bounds ? 1.0 : 0.0;
            for (int ch = 0; ch < nc; ++ch) {
                double v, dx, dy;
                sample_channel(src.plane(ch), w, c, v, dx, dy);
                out.at(x, y, ch) = v;
                if (WithDerivs) {
                    ddx->at(x, y, ch) = dx;
                    ddy->at(x, y, ch) = dy;
                }
            }
        }
    }
}

}  // namespace

WarpResult warp_stereo(const ImageField& src_right, const ImageField& disparity) {
    WarpResult r;
    warp_impl<false>(src_right, disparity, QueryKind::Stereo, r.image, r.validity,
                     nullptr, nullptr);
    return r;
}

WarpDerivResult warp_stereo_with_derivs(const ImageField& src_right,
                                        const ImageField& disparity) {
    WarpDerivResult r;
    warp_impl<true>(src_right, disparity, QueryKind::Stereo, r.image, r.validity,
                    &r.d_dx, &r.d_dy);
    return r;
}

WarpResult warp_temporal(const ImageField& src, const ImageField& flow) {
    WarpResult r;
    warp_impl<false>(src, flow, QueryKind::Flow, r.image, r.validity, nullptr, nullptr);
    return r;
}

WarpDerivResult warp_temporal_with_derivs(const ImageField& src,
                                          const ImageField& flow) {
    WarpDerivResult r;
    warp_impl<true>(src, flow, QueryKind::Flow, r.image, r.validity, &r.d_dx, &r.d_dy);
    return r;
}

WarpResult warp_scalar_by_flow(const ImageField& field, const ImageField& flow) {
    return warp_temporal(field, flow);
}

}  // namespace sflow
