#pragma once

// Naive scalar reference implementations used only by tests. They work on
// std::complex values and plain loops so they share no code with the library.

#include <complex>
#include <vector>

#include "ctfa/attention.hpp"
#include "ctfa/ops.hpp"
#include "ctfa/tensor.hpp"

namespace ctfa::oracle {

using cd = std::complex<double>;

inline ComplexTensor matmul(const ComplexTensor& a, const ComplexTensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    ComplexTensor c(Shape{m, n});
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t col = 0; col < n; ++col) {
            cd acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a.at({r, p}) * b.at({p, col});
            c.set({r, col}, acc);
        }
    }
    return c;
}

inline ComplexTensor conj_transpose(const ComplexTensor& a) {
    ComplexTensor c(Shape{a.dim(1), a.dim(0)});
    for (std::size_t r = 0; r < a.dim(0); ++r)
        for (std::size_t col = 0; col < a.dim(1); ++col) c.set({col, r}, std::conj(a.at({r, col})));
    return c;
}

using Grid = std::vector<std::vector<cd>>;  // [row][feature]

// 1x1 channel mixing, complex or per part.
inline ComplexTensor project(const ComplexTensor& x, const ComplexTensor& w, bool complex_mode) {
    const std::size_t B = x.dim(0), C = x.dim(1), P = x.dim(2) * x.dim(3);
    ComplexTensor y(x.shape());
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < C; ++o)
            for (std::size_t p = 0; p < P; ++p) {
                cd acc = 0;
                for (std::size_t c = 0; c < C; ++c) {
                    const cd wv = w.at(o * C + c), xv = x.at((b * C + c) * P + p);
                    acc += complex_mode ? wv * xv : cd(wv.real() * xv.real(), wv.imag() * xv.imag());
                }
                y.set((b * C + o) * P + p, acc);
            }
    return y;
}

// Rows of batch b along the given axis; features ordered (other axis, channel).
inline Grid rows_of(const ComplexTensor& x, std::size_t b, Axis axis) {
    const std::size_t C = x.dim(1), T = x.dim(2), F = x.dim(3);
    const std::size_t L = axis == Axis::Time ? T : F, M = axis == Axis::Time ? F : T;
    Grid g(L, std::vector<cd>(M * C));
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t t = axis == Axis::Time ? l : m, f = axis == Axis::Time ? m : l;
                g[l][m * C + c] = x.at({b, c, t, f});
            }
    return g;
}

inline void write_rows(ComplexTensor& x, std::size_t b, Axis axis, const Grid& g) {
    const std::size_t C = x.dim(1);
    for (std::size_t l = 0; l < g.size(); ++l)
        for (std::size_t j = 0; j < g[l].size(); ++j) {
            const std::size_t m = j / C, c = j % C;
            const std::size_t t = axis == Axis::Time ? l : m, f = axis == Axis::Time ? m : l;
            x.set({b, c, t, f}, g[l][j]);
        }
}

inline std::vector<double> naive_softmax(const std::vector<double>& row) {
    std::vector<double> out(row.size());
    double sum = 0;
    for (std::size_t j = 0; j < row.size(); ++j) sum += std::exp(row[j]);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = std::exp(row[j]) / sum;
    return out;
}

// Per part: W = softmax(Q K^T), A = W V.
inline ComplexTensor conventional_oracle(const ComplexTensor& x, const AttentionProjections& p, Axis axis) {
    auto q = project(x, p.query.value(), false), k = project(x, p.key.value(), false),
         v = project(x, p.value.value(), false);
    ComplexTensor out(x.shape());
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        Grid Q = rows_of(q, b, axis), K = rows_of(k, b, axis), V = rows_of(v, b, axis), A = V;
        const std::size_t L = Q.size(), M = Q[0].size();
        for (std::size_t i = 0; i < L; ++i) {
            std::vector<double> cr(L), ci(L);
            for (std::size_t j = 0; j < L; ++j)
                for (std::size_t m = 0; m < M; ++m) {
                    cr[j] += Q[i][m].real() * K[j][m].real();
                    ci[j] += Q[i][m].imag() * K[j][m].imag();
                }
            auto wr = naive_softmax(cr), wi = naive_softmax(ci);
            for (std::size_t m = 0; m < M; ++m) {
                double ar = 0, ai = 0;
                for (std::size_t j = 0; j < L; ++j) {
                    ar += wr[j] * V[j][m].real();
                    ai += wi[j] * V[j][m].imag();
                }
                A[i][m] = {ar, ai};
            }
        }
        write_rows(out, b, axis, A);
    }
    return out;
}

// Corr = (QrKr^T + QiKi^T) + j(QiKr^T - QrKi^T) term by term; W = softmax(|Corr|).
inline ComplexTensor complex_oracle(const ComplexTensor& x, const AttentionProjections& p, Axis axis) {
    auto q = project(x, p.query.value(), true), k = project(x, p.key.value(), true),
         v = project(x, p.value.value(), true);
    ComplexTensor out(x.shape());
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        Grid Q = rows_of(q, b, axis), K = rows_of(k, b, axis), V = rows_of(v, b, axis), A = V;
        const std::size_t L = Q.size(), M = Q[0].size();
        for (std::size_t i = 0; i < L; ++i) {
            std::vector<double> mag(L);
            for (std::size_t j = 0; j < L; ++j) {
                double re = 0, im = 0;
                for (std::size_t m = 0; m < M; ++m) {
                    re += Q[i][m].real() * K[j][m].real() + Q[i][m].imag() * K[j][m].imag();
                    im += Q[i][m].imag() * K[j][m].real() - Q[i][m].real() * K[j][m].imag();
                }
                mag[j] = std::hypot(re, im);
            }
            auto w = naive_softmax(mag);
            for (std::size_t m = 0; m < M; ++m) {
                cd acc = 0;
                for (std::size_t j = 0; j < L; ++j) acc += w[j] * V[j][m];
                A[i][m] = acc;
            }
        }
        write_rows(out, b, axis, A);
    }
    return out;
}

// y_i = b_i + sum_j W_ij x_j along the axis, real plane on the real part and
// imaginary plane on the imaginary part.
inline ComplexTensor sdab_oracle(const ComplexTensor& x, const ComplexTensor& w, const ComplexTensor& bias, Axis axis) {
    ComplexTensor out(x.shape());
    const std::size_t L = w.dim(0);
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        Grid X = rows_of(x, b, axis), Y = X;
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t m = 0; m < X[0].size(); ++m) {
                double r = bias.at(i).real(), im = bias.at(i).imag();
                for (std::size_t j = 0; j < L; ++j) {
                    r += w.at(i * L + j).real() * X[j][m].real();
                    im += w.at(i * L + j).imag() * X[j][m].imag();
                }
                Y[i][m] = {r, im};
            }
        write_rows(out, b, axis, Y);
    }
    return out;
}

// Direct complex cross-correlation with zero padding; weight [Co, Ci, Kt, Kf].
inline ComplexTensor conv2d(const ComplexTensor& x, const ComplexTensor& w, const Conv2dGeometry& g) {
    const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    const std::size_t Ho = (H + 2 * g.pad_t - Kh) / g.stride_t + 1;
    const std::size_t Wo = (W + 2 * g.pad_f - Kw) / g.stride_f + 1;
    ComplexTensor y({B, Co, Ho, Wo});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < Co; ++o)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    cd acc = 0.0;
                    for (std::size_t c = 0; c < Ci; ++c)
                        for (std::size_t i = 0; i < Kh; ++i)
                            for (std::size_t j = 0; j < Kw; ++j) {
                                const long ih = long(oh * g.stride_t + i) - long(g.pad_t);
                                const long iw = long(ow * g.stride_f + j) - long(g.pad_f);
                                if (ih < 0 || iw < 0 || ih >= long(H) || iw >= long(W)) continue;
                                acc += w.at({o, c, i, j}) * x.at({b, c, std::size_t(ih), std::size_t(iw)});
                            }
                    y.set({b, o, oh, ow}, acc);
                }
    return y;
}

// Full linear convolution truncated to len(s).
inline std::vector<double> convolve(const std::vector<double>& s, const std::vector<double>& h) {
    std::vector<double> y(s.size(), 0.0);
    for (std::size_t n = 0; n < s.size(); ++n)
        for (std::size_t k = 0; k <= n && k < h.size(); ++k) y[n] += h[k] * s[n - k];
    return y;
}

}  // namespace ctfa::oracle
