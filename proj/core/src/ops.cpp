#include "ctfa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctfa/errors.hpp"
#include "kernels.hpp"

namespace ctfa {

namespace {

using kernels::CPlanes;
using kernels::MutPlanes;

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

Node& parent(Node& self, std::size_t i) {
    return *self.parents[i];
}

kernels::Mode to_kernel(ProductMode mode) {
    switch (mode) {
        case ProductMode::Complex: return kernels::Mode::Complex;
        case ProductMode::Partwise: return kernels::Mode::Partwise;
        case ProductMode::RealLeft: return kernels::Mode::RealLeft;
    }
    return kernels::Mode::Complex;
}

CPlanes planes(const ComplexTensor& t, std::size_t offset = 0) {
    return {t.re().data() + offset, t.im().data() + offset};
}

MutPlanes mut_planes(ComplexTensor& t, std::size_t offset = 0) {
    return {t.re().data() + offset, t.im().data() + offset};
}

// Elementwise map applied to each part independently, with a derivative
// expressed through the output value.
template <typename F, typename DF>
Var map_parts(const Var& x, F f, DF df_from_y, const char* op) {
    ComplexTensor y(x.shape());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.re()[i] = f(xv.re()[i]);
        y.im()[i] = f(xv.im()[i]);
    }
    return make_result(
        std::move(y), {x},
        [df_from_y](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g.re()[i] += self.grad.re()[i] * df_from_y(self.value.re()[i]);
                g.im()[i] += self.grad.im()[i] * df_from_y(self.value.im()[i]);
            }
        },
        op);
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    ComplexTensor y = a.value();
    y.axpy(1.0, b.value());
    return make_result(
        std::move(y), {a, b},
        [](Node& self) {
            for (std::size_t p = 0; p < 2; ++p) {
                if (parent(self, p).requires_grad) parent(self, p).grad_buffer().axpy(1.0, self.grad);
            }
        },
        "add");
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    ComplexTensor y = a.value();
    y.axpy(-1.0, b.value());
    return make_result(
        std::move(y), {a, b},
        [](Node& self) {
            if (parent(self, 0).requires_grad) parent(self, 0).grad_buffer().axpy(1.0, self.grad);
            if (parent(self, 1).requires_grad) parent(self, 1).grad_buffer().axpy(-1.0, self.grad);
        },
        "sub");
}

Var scale(const Var& a, double alpha) {
    ComplexTensor y(a.shape());
    y.axpy(alpha, a.value());
    return make_result(
        std::move(y), {a},
        [alpha](Node& self) {
            if (parent(self, 0).requires_grad) parent(self, 0).grad_buffer().axpy(alpha, self.grad);
        },
        "scale");
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    const auto& av = a.value();
    const auto& bv = b.value();
    ComplexTensor y(a.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.re()[i] = av.re()[i] * bv.re()[i] - av.im()[i] * bv.im()[i];
        y.im()[i] = av.re()[i] * bv.im()[i] + av.im()[i] * bv.re()[i];
    }
    return make_result(
        std::move(y), {a, b},
        [](Node& self) {
            // d/da = g * conj(b), d/db = g * conj(a)
            for (std::size_t p = 0; p < 2; ++p) {
                Node& target = parent(self, p);
                if (!target.requires_grad) continue;
                const auto& other = parent(self, 1 - p).value;
                auto& g = target.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double gr = self.grad.re()[i];
                    const double gi = self.grad.im()[i];
                    g.re()[i] += gr * other.re()[i] + gi * other.im()[i];
                    g.im()[i] += gi * other.re()[i] - gr * other.im()[i];
                }
            }
        },
        "mul");
}

Var mul_partwise(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul_partwise");
    const auto& av = a.value();
    const auto& bv = b.value();
    ComplexTensor y(a.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.re()[i] = av.re()[i] * bv.re()[i];
        y.im()[i] = av.im()[i] * bv.im()[i];
    }
    return make_result(
        std::move(y), {a, b},
        [](Node& self) {
            for (std::size_t p = 0; p < 2; ++p) {
                Node& target = parent(self, p);
                if (!target.requires_grad) continue;
                const auto& other = parent(self, 1 - p).value;
                auto& g = target.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g.re()[i] += self.grad.re()[i] * other.re()[i];
                    g.im()[i] += self.grad.im()[i] * other.im()[i];
                }
            }
        },
        "mul_partwise");
}

Var conj(const Var& a) {
    ComplexTensor y = a.value();
    for (auto& v : y.im()) v = -v;
    return make_result(
        std::move(y), {a},
        [](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g.re()[i] += self.grad.re()[i];
                g.im()[i] -= self.grad.im()[i];
            }
        },
        "conj");
}

Var crelu(const Var& x) {
    return map_parts(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; }, "crelu");
}

Var sigmoid_parts(const Var& x) {
    return map_parts(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double y) { return y * (1.0 - y); }, "sigmoid_parts");
}

Var tanh_parts(const Var& x) {
    return map_parts(
        x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; }, "tanh_parts");
}

Var modulus(const Var& x) {
    const auto& xv = x.value();
    ComplexTensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.re()[i] = std::hypot(xv.re()[i], xv.im()[i]);
    return make_result(
        std::move(y), {x},
        [](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            const auto& xv = px.value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double m = self.value.re()[i];
                if (m == 0.0) continue;
                const double gm = self.grad.re()[i] / m;
                g.re()[i] += gm * xv.re()[i];
                g.im()[i] += gm * xv.im()[i];
            }
        },
        "modulus");
}

Var add_bias(const Var& x, const Var& bias, std::size_t axis) {
    if (axis >= x.shape().size()) throw ShapeError("add_bias: axis out of range");
    const std::size_t len = x.dim(axis);
    if (bias.shape() != Shape{len}) {
        throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " for axis of length " + std::to_string(len));
    }
    const Shape& s = x.shape();
    const std::size_t outer = std::accumulate(s.begin(), s.begin() + static_cast<long>(axis), std::size_t{1},
                                              std::multiplies<>());
    const std::size_t inner = std::accumulate(s.begin() + static_cast<long>(axis) + 1, s.end(), std::size_t{1},
                                              std::multiplies<>());
    ComplexTensor y = x.value();
    const auto& bv = bias.value();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t a = 0; a < len; ++a) {
            const std::size_t base = (o * len + a) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
                y.re()[base + i] += bv.re()[a];
                y.im()[base + i] += bv.im()[a];
            }
        }
    }
    return make_result(
        std::move(y), {x, bias},
        [outer, len, inner](Node& self) {
            if (parent(self, 0).requires_grad) parent(self, 0).grad_buffer().axpy(1.0, self.grad);
            Node& pb = parent(self, 1);
            if (!pb.requires_grad) return;
            auto& gb = pb.grad_buffer();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t a = 0; a < len; ++a) {
                    const std::size_t base = (o * len + a) * inner;
                    double sr = 0.0;
                    double si = 0.0;
                    for (std::size_t i = 0; i < inner; ++i) {
                        sr += self.grad.re()[base + i];
                        si += self.grad.im()[base + i];
                    }
                    gb.re()[a] += sr;
                    gb.im()[a] += si;
                }
            }
        },
        "add_bias");
}

Var sum_parts(const Var& x) {
    const auto& xv = x.value();
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv.re()[i] + xv.im()[i];
    ComplexTensor y(Shape{});
    y.re()[0] = s;
    return make_result(
        std::move(y), {x},
        [](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            const double g = self.grad.re()[0];
            auto& gx = px.grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx.re()[i] += g;
                gx.im()[i] += g;
            }
        },
        "sum_parts");
}

Var inner(const Var& x, const ComplexTensor& weights) {
    if (weights.shape() != x.shape()) {
        throw ShapeError("inner: weights " + to_string(weights.shape()) + " vs " + to_string(x.shape()));
    }
    const auto& xv = x.value();
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv.re()[i] * weights.re()[i] + xv.im()[i] * weights.im()[i];
    ComplexTensor y(Shape{});
    y.re()[0] = s;
    return make_result(
        std::move(y), {x},
        [weights](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            px.grad_buffer().axpy(self.grad.re()[0], weights);
        },
        "inner");
}

Var reshape(const Var& x, Shape shape) {
    ComplexTensor y = x.value().reshaped(std::move(shape));
    return make_result(
        std::move(y), {x},
        [](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g.re()[i] += self.grad.re()[i];
                g.im()[i] += self.grad.im()[i];
            }
        },
        "reshape");
}

namespace {

// For each output flat index, the flat index it reads from in the input.
std::vector<std::size_t> permutation_map(const Shape& in, const std::vector<std::size_t>& axes, Shape& out) {
    const std::size_t r = in.size();
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
    out.resize(r);
    std::vector<std::size_t> strides(r);
    for (std::size_t i = 0; i < r; ++i) {
        out[i] = in[axes[i]];
        strides[i] = in_strides[axes[i]];
    }
    const std::size_t n = numel(in);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        map[flat] = src;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            src += strides[d];
            if (idx[d] < out[d]) break;
            src -= strides[d] * out[d];
            idx[d] = 0;
        }
    }
    return map;
}

}  // namespace

Var permute(const Var& x, const std::vector<std::size_t>& axes) {
    const Shape& in = x.shape();
    if (axes.size() != in.size()) throw ShapeError("permute: axis count does not match rank");
    std::vector<bool> seen(in.size(), false);
    for (auto a : axes) {
        if (a >= in.size() || seen[a]) throw ShapeError("permute: invalid axis permutation");
        seen[a] = true;
    }
    Shape out;
    auto map = permutation_map(in, axes, out);
    const auto& xv = x.value();
    ComplexTensor y(out);
    for (std::size_t i = 0; i < map.size(); ++i) {
        y.re()[i] = xv.re()[map[i]];
        y.im()[i] = xv.im()[map[i]];
    }
    return make_result(
        std::move(y), {x},
        [map = std::move(map)](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < map.size(); ++i) {
                g.re()[map[i]] += self.grad.re()[i];
                g.im()[map[i]] += self.grad.im()[i];
            }
        },
        "permute");
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
    std::vector<std::size_t> lengths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (d != axis && s[d] != s0[d]) {
                throw ShapeError("concat: shape " + to_string(s) + " incompatible with " + to_string(s0));
            }
        }
        lengths.push_back(s[axis]);
        total += s[axis];
    }
    Shape out = s0;
    out[axis] = total;
    const std::size_t outer = std::accumulate(s0.begin(), s0.begin() + static_cast<long>(axis), std::size_t{1},
                                              std::multiplies<>());
    const std::size_t inner = std::accumulate(s0.begin() + static_cast<long>(axis) + 1, s0.end(), std::size_t{1},
                                              std::multiplies<>());
    ComplexTensor y(out);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& v = parts[p].value();
        const std::size_t block = lengths[p] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(v.re().begin() + static_cast<long>(o * block), block,
                        y.re().begin() + static_cast<long>(o * total * inner + offset));
            std::copy_n(v.im().begin() + static_cast<long>(o * block), block,
                        y.im().begin() + static_cast<long>(o * total * inner + offset));
        }
        offset += block;
    }
    return make_result(
        std::move(y), parts,
        [lengths, outer, inner, total](Node& self) {
            std::size_t offset = 0;
            for (std::size_t p = 0; p < lengths.size(); ++p) {
                const std::size_t block = lengths[p] * inner;
                Node& target = parent(self, p);
                if (target.requires_grad) {
                    auto& g = target.grad_buffer();
                    for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t i = 0; i < block; ++i) {
                            g.re()[o * block + i] += self.grad.re()[o * total * inner + offset + i];
                            g.im()[o * block + i] += self.grad.im()[o * total * inner + offset + i];
                        }
                    }
                }
                offset += block;
            }
        },
        "concat");
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw ShapeError("slice: axis out of range");
    if (start + length > s[axis]) throw ShapeError("slice: range exceeds axis length");
    Shape out = s;
    out[axis] = length;
    const std::size_t outer = std::accumulate(s.begin(), s.begin() + static_cast<long>(axis), std::size_t{1},
                                              std::multiplies<>());
    const std::size_t inner = std::accumulate(s.begin() + static_cast<long>(axis) + 1, s.end(), std::size_t{1},
                                              std::multiplies<>());
    const std::size_t full = s[axis];
    const auto& xv = x.value();
    ComplexTensor y(out);
    const std::size_t block = length * inner;
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t src = (o * full + start) * inner;
        std::copy_n(xv.re().begin() + static_cast<long>(src), block, y.re().begin() + static_cast<long>(o * block));
        std::copy_n(xv.im().begin() + static_cast<long>(src), block, y.im().begin() + static_cast<long>(o * block));
    }
    return make_result(
        std::move(y), {x},
        [outer, inner, full, start, block](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            for (std::size_t o = 0; o < outer; ++o) {
                const std::size_t dst = (o * full + start) * inner;
                for (std::size_t i = 0; i < block; ++i) {
                    g.re()[dst + i] += self.grad.re()[o * block + i];
                    g.im()[dst + i] += self.grad.im()[o * block + i];
                }
            }
        },
        "slice");
}

Var transpose(const Var& x, bool conjugate) {
    const Shape& s = x.shape();
    if (s.size() != 2 && s.size() != 3) {
        throw ShapeError("transpose: expected rank 2 or 3, got " + to_string(s));
    }
    std::vector<std::size_t> axes = s.size() == 2 ? std::vector<std::size_t>{1, 0} : std::vector<std::size_t>{0, 2, 1};
    Var t = permute(x, axes);
    return conjugate ? conj(t) : t;
}

Var hermitian_transpose(const Var& x) {
    if (x.shape().size() != 2) {
        throw ShapeError("hermitian_transpose: expected a matrix, got " + to_string(x.shape()));
    }
    return transpose(x, true);
}

Var matmul(const Var& a, const Var& b, ProductMode mode) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if ((sa.size() != 2 && sa.size() != 3) || (sb.size() != 2 && sb.size() != 3)) {
        throw ShapeError("matmul: operands must be rank 2 or 3, got " + to_string(sa) + " and " + to_string(sb));
    }
    const bool ba = sa.size() == 3;
    const bool bb = sb.size() == 3;
    const std::size_t batch = ba ? sa[0] : (bb ? sb[0] : 1);
    if (ba && bb && sa[0] != sb[0]) throw ShapeError("matmul: batch sizes differ");
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t k = sa[sa.size() - 1];
    const std::size_t k2 = sb[sb.size() - 2];
    const std::size_t n = sb[sb.size() - 1];
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions differ: " + to_string(sa) + " x " + to_string(sb));
    }
    Shape out = (ba || bb) ? Shape{batch, m, n} : Shape{m, n};
    ComplexTensor y(out);
    const auto kmode = to_kernel(mode);
    const std::size_t a_step = ba ? m * k : 0;
    const std::size_t b_step = bb ? k * n : 0;
    for (std::size_t i = 0; i < batch; ++i) {
        kernels::cgemm(kernels::Op::N, kernels::Op::N, kmode, m, n, k, planes(a.value(), i * a_step),
                       planes(b.value(), i * b_step), mut_planes(y, i * m * n));
    }
    return make_result(
        std::move(y), {a, b},
        [=](Node& self) {
            Node& pa = parent(self, 0);
            Node& pb = parent(self, 1);
            for (std::size_t i = 0; i < batch; ++i) {
                const CPlanes g = planes(self.grad, i * m * n);
                if (pa.requires_grad) {
                    auto& ga = pa.grad_buffer();
                    const CPlanes bv = planes(pb.value, i * b_step);
                    MutPlanes out = mut_planes(ga, i * a_step);
                    switch (mode) {
                        case ProductMode::Complex:
                            kernels::cgemm(kernels::Op::N, kernels::Op::H, kernels::Mode::Complex, m, k, n, g, bv, out);
                            break;
                        case ProductMode::Partwise:
                            kernels::cgemm(kernels::Op::N, kernels::Op::T, kernels::Mode::Partwise, m, k, n, g, bv,
                                           out);
                            break;
                        case ProductMode::RealLeft:
                            kernels::gemm(false, true, m, k, n, 1.0, g.re, bv.re, out.re);
                            kernels::gemm(false, true, m, k, n, 1.0, g.im, bv.im, out.re);
                            break;
                    }
                }
                if (pb.requires_grad) {
                    auto& gb = pb.grad_buffer();
                    const CPlanes av = planes(pa.value, i * a_step);
                    MutPlanes out = mut_planes(gb, i * b_step);
                    switch (mode) {
                        case ProductMode::Complex:
                            kernels::cgemm(kernels::Op::H, kernels::Op::N, kernels::Mode::Complex, k, n, m, av, g, out);
                            break;
                        case ProductMode::Partwise:
                            kernels::cgemm(kernels::Op::T, kernels::Op::N, kernels::Mode::Partwise, k, n, m, av, g,
                                           out);
                            break;
                        case ProductMode::RealLeft:
                            kernels::cgemm(kernels::Op::T, kernels::Op::N, kernels::Mode::RealLeft, k, n, m, av, g,
                                           out);
                            break;
                    }
                }
            }
        },
        "matmul");
}

Var softmax_last(const Var& x, bool both_parts) {
    const Shape& s = x.shape();
    if (s.empty()) throw ShapeError("softmax_last: scalar input");
    const std::size_t len = s.back();
    const std::size_t rows = len == 0 ? 0 : x.value().size() / len;
    ComplexTensor y(s);
    auto row_softmax = [len](const double* in, double* out) {
        double mx = in[0];
        for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        for (std::size_t j = 0; j < len; ++j) out[j] /= sum;
    };
    const auto& xv = x.value();
    for (std::size_t r = 0; r < rows; ++r) {
        row_softmax(xv.re().data() + r * len, y.re().data() + r * len);
        if (both_parts) row_softmax(xv.im().data() + r * len, y.im().data() + r * len);
    }
    return make_result(
        std::move(y), {x},
        [rows, len, both_parts](Node& self) {
            Node& px = parent(self, 0);
            if (!px.requires_grad) return;
            auto& g = px.grad_buffer();
            auto row_back = [len](const double* y, const double* gy, double* gx) {
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) dot += gy[j] * y[j];
                for (std::size_t j = 0; j < len; ++j) gx[j] += y[j] * (gy[j] - dot);
            };
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t o = r * len;
                row_back(self.value.re().data() + o, self.grad.re().data() + o, g.re().data() + o);
                if (both_parts) row_back(self.value.im().data() + o, self.grad.im().data() + o, g.im().data() + o);
            }
        },
        "softmax_last");
}

}  // namespace ctfa
