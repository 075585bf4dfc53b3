#include <algorithm>

#include "ctfa/errors.hpp"
#include "ctfa/ops.hpp"
#include "kernels.hpp"

namespace ctfa {

namespace {

struct Dims {
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    std::size_t kh;
    std::size_t kw;
    std::size_t out_h;
    std::size_t out_w;
};

// cols[(c*kh + i)*kw + j, oh*out_w + ow] = x[c, oh*st + i - pt, ow*sf + j - pf]
void im2col(const double* x, const Dims& d, const Conv2dGeometry& g, double* cols) {
    const std::size_t positions = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
                double* row = cols + ((c * d.kh + i) * d.kw + j) * positions;
                for (std::size_t oh = 0; oh < d.out_h; ++oh) {
                    const long ih = static_cast<long>(oh * g.stride_t + i) - static_cast<long>(g.pad_t);
                    double* dst = row + oh * d.out_w;
                    if (ih < 0 || ih >= static_cast<long>(d.height)) {
                        std::fill_n(dst, d.out_w, 0.0);
                        continue;
                    }
                    const double* src = x + (c * d.height + static_cast<std::size_t>(ih)) * d.width;
                    for (std::size_t ow = 0; ow < d.out_w; ++ow) {
                        const long iw = static_cast<long>(ow * g.stride_f + j) - static_cast<long>(g.pad_f);
                        dst[ow] = (iw < 0 || iw >= static_cast<long>(d.width)) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds columns back into the image.
void col2im(const double* cols, const Dims& d, const Conv2dGeometry& g, double* x) {
    const std::size_t positions = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
                const double* row = cols + ((c * d.kh + i) * d.kw + j) * positions;
                for (std::size_t oh = 0; oh < d.out_h; ++oh) {
                    const long ih = static_cast<long>(oh * g.stride_t + i) - static_cast<long>(g.pad_t);
                    if (ih < 0 || ih >= static_cast<long>(d.height)) continue;
                    double* dst = x + (c * d.height + static_cast<std::size_t>(ih)) * d.width;
                    const double* src = row + oh * d.out_w;
                    for (std::size_t ow = 0; ow < d.out_w; ++ow) {
                        const long iw = static_cast<long>(ow * g.stride_f + j) - static_cast<long>(g.pad_f);
                        if (iw >= 0 && iw < static_cast<long>(d.width)) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

struct ColBuffer {
    std::vector<double> re;
    std::vector<double> im;
    explicit ColBuffer(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
    kernels::CPlanes planes() const { return {re.data(), im.data()}; }
    kernels::MutPlanes mut() { return {re.data(), im.data()}; }
    void zero() {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
    }
};

void check_geometry(const Conv2dGeometry& g) {
    if (g.stride_t == 0 || g.stride_f == 0) throw ContractError("conv: stride must be positive");
}

void add_channel_bias(ComplexTensor& y, const ComplexTensor& bias, std::size_t batch, std::size_t channels,
                      std::size_t positions) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * positions;
            for (std::size_t p = 0; p < positions; ++p) {
                y.re()[base + p] += bias.re()[c];
                y.im()[base + p] += bias.im()[c];
            }
        }
    }
}

void accumulate_channel_bias(Node& bias, const ComplexTensor& grad, std::size_t batch, std::size_t channels,
                             std::size_t positions) {
    auto& gb = bias.grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * positions;
            double sr = 0.0;
            double si = 0.0;
            for (std::size_t p = 0; p < positions; ++p) {
                sr += grad.re()[base + p];
                si += grad.im()[base + p];
            }
            gb.re()[c] += sr;
            gb.im()[c] += si;
        }
    }
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (in + 2 * pad < kernel) throw ShapeError("conv: input smaller than kernel after padding");
    return (in + 2 * pad - kernel) / stride + 1;
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dGeometry& geo, ProductMode mode) {
    check_geometry(geo);
    if (mode == ProductMode::RealLeft) throw ContractError("conv2d: RealLeft mode is not supported");
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 4) throw ShapeError("conv2d: input must be [B, C, T, F], got " + to_string(xs));
    if (ws.size() != 4) throw ShapeError("conv2d: weight must be [C_out, C_in, K_t, K_f], got " + to_string(ws));
    if (ws[1] != xs[1]) {
        throw ShapeError("conv2d: input has " + std::to_string(xs[1]) + " channels, kernel expects " +
                         std::to_string(ws[1]));
    }
    const bool has_bias = bias.defined();
    if (has_bias && bias.shape() != Shape{ws[0]}) throw ShapeError("conv2d: bias must be [C_out]");

    const std::size_t batch = xs[0];
    const std::size_t c_out = ws[0];
    Dims d{xs[1], xs[2], xs[3], ws[2], ws[3], 0, 0};
    d.out_h = conv_out_size(d.height, d.kh, geo.stride_t, geo.pad_t);
    d.out_w = conv_out_size(d.width, d.kw, geo.stride_f, geo.pad_f);
    const std::size_t positions = d.out_h * d.out_w;
    const std::size_t patch = d.channels * d.kh * d.kw;
    const std::size_t in_plane = d.channels * d.height * d.width;
    const auto kmode = mode == ProductMode::Complex ? kernels::Mode::Complex : kernels::Mode::Partwise;

    ComplexTensor y(Shape{batch, c_out, d.out_h, d.out_w});
    ColBuffer cols(patch * positions);
    const auto& xv = x.value();
    const auto& wv = weight.value();
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(xv.re().data() + b * in_plane, d, geo, cols.re.data());
        im2col(xv.im().data() + b * in_plane, d, geo, cols.im.data());
        kernels::cgemm(kernels::Op::N, kernels::Op::N, kmode, c_out, positions, patch, {wv.re().data(), wv.im().data()},
                       cols.planes(), {y.re().data() + b * c_out * positions, y.im().data() + b * c_out * positions});
    }
    if (has_bias) add_channel_bias(y, bias.value(), batch, c_out, positions);

    std::vector<Var> parents{x, weight};
    if (has_bias) parents.push_back(bias);
    return make_result(
        std::move(y), std::move(parents),
        [=](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            const auto& xv = px.value;
            const auto& wv = pw.value;
            ColBuffer cols(patch * positions);
            const kernels::Op adj = kmode == kernels::Mode::Complex ? kernels::Op::H : kernels::Op::T;
            for (std::size_t b = 0; b < batch; ++b) {
                const kernels::CPlanes g{self.grad.re().data() + b * c_out * positions,
                                         self.grad.im().data() + b * c_out * positions};
                if (pw.requires_grad) {
                    im2col(xv.re().data() + b * in_plane, d, geo, cols.re.data());
                    im2col(xv.im().data() + b * in_plane, d, geo, cols.im.data());
                    auto& gw = pw.grad_buffer();
                    kernels::cgemm(kernels::Op::N, adj, kmode, c_out, patch, positions, g, cols.planes(),
                                   {gw.re().data(), gw.im().data()});
                }
                if (px.requires_grad) {
                    cols.zero();
                    kernels::cgemm(adj, kernels::Op::N, kmode, patch, positions, c_out,
                                   {wv.re().data(), wv.im().data()}, g, cols.mut());
                    auto& gx = px.grad_buffer();
                    col2im(cols.re.data(), d, geo, gx.re().data() + b * in_plane);
                    col2im(cols.im.data(), d, geo, gx.im().data() + b * in_plane);
                }
            }
            if (has_bias && self.parents[2]->requires_grad) {
                accumulate_channel_bias(*self.parents[2], self.grad, batch, c_out, positions);
            }
        },
        mode == ProductMode::Complex ? "conv2d" : "conv2d_partwise");
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, const Conv2dGeometry& geo) {
    check_geometry(geo);
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 4) throw ShapeError("conv_transpose2d: input must be [B, C, T, F], got " + to_string(xs));
    if (ws.size() != 4) {
        throw ShapeError("conv_transpose2d: weight must be [C_in, C_out, K_t, K_f], got " + to_string(ws));
    }
    if (ws[0] != xs[1]) {
        throw ShapeError("conv_transpose2d: input has " + std::to_string(xs[1]) + " channels, kernel expects " +
                         std::to_string(ws[0]));
    }
    const bool has_bias = bias.defined();
    if (has_bias && bias.shape() != Shape{ws[1]}) throw ShapeError("conv_transpose2d: bias must be [C_out]");

    const std::size_t batch = xs[0];
    const std::size_t c_in = ws[0];
    const std::size_t c_out = ws[1];
    const std::size_t in_h = xs[2];
    const std::size_t in_w = xs[3];
    const long oh = static_cast<long>((in_h - 1) * geo.stride_t + ws[2]) - 2 * static_cast<long>(geo.pad_t);
    const long ow = static_cast<long>((in_w - 1) * geo.stride_f + ws[3]) - 2 * static_cast<long>(geo.pad_f);
    if (oh <= 0 || ow <= 0) throw ShapeError("conv_transpose2d: non-positive output size");
    // The output image plays the role of a convolution input whose output grid is x.
    Dims d{c_out, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), ws[2], ws[3], in_h, in_w};
    if (conv_out_size(d.height, d.kh, geo.stride_t, geo.pad_t) != in_h ||
        conv_out_size(d.width, d.kw, geo.stride_f, geo.pad_f) != in_w) {
        throw ShapeError("conv_transpose2d: geometry does not invert cleanly");
    }
    const std::size_t positions = in_h * in_w;
    const std::size_t patch = c_out * d.kh * d.kw;
    const std::size_t out_plane = c_out * d.height * d.width;

    ComplexTensor y(Shape{batch, c_out, d.height, d.width});
    ColBuffer cols(patch * positions);
    const auto& xv = x.value();
    const auto& wv = weight.value();
    for (std::size_t b = 0; b < batch; ++b) {
        cols.zero();
        kernels::cgemm(kernels::Op::T, kernels::Op::N, kernels::Mode::Complex, patch, positions, c_in,
                       {wv.re().data(), wv.im().data()},
                       {xv.re().data() + b * c_in * positions, xv.im().data() + b * c_in * positions}, cols.mut());
        col2im(cols.re.data(), d, geo, y.re().data() + b * out_plane);
        col2im(cols.im.data(), d, geo, y.im().data() + b * out_plane);
    }
    if (has_bias) add_channel_bias(y, bias.value(), batch, c_out, d.height * d.width);

    std::vector<Var> parents{x, weight};
    if (has_bias) parents.push_back(bias);
    return make_result(
        std::move(y), std::move(parents),
        [=](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            ColBuffer gcols(patch * positions);
            for (std::size_t b = 0; b < batch; ++b) {
                im2col(self.grad.re().data() + b * out_plane, d, geo, gcols.re.data());
                im2col(self.grad.im().data() + b * out_plane, d, geo, gcols.im.data());
                if (px.requires_grad) {
                    auto& gx = px.grad_buffer();
                    kernels::cgemm(kernels::Op::C, kernels::Op::N, kernels::Mode::Complex, c_in, positions, patch,
                                   {pw.value.re().data(), pw.value.im().data()}, gcols.planes(),
                                   {gx.re().data() + b * c_in * positions, gx.im().data() + b * c_in * positions});
                }
                if (pw.requires_grad) {
                    auto& gw = pw.grad_buffer();
                    kernels::cgemm(kernels::Op::C, kernels::Op::T, kernels::Mode::Complex, c_in, patch, positions,
                                   {px.value.re().data() + b * c_in * positions,
                                    px.value.im().data() + b * c_in * positions},
                                   gcols.planes(), {gw.re().data(), gw.im().data()});
                }
            }
            if (has_bias && self.parents[2]->requires_grad) {
                accumulate_channel_bias(*self.parents[2], self.grad, batch, c_out, d.height * d.width);
            }
        },
        "conv_transpose2d");
}

}  // namespace ctfa
