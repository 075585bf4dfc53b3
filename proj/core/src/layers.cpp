#include "ctfa/layers.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <random>

#include "ctfa/errors.hpp"

namespace ctfa {

std::size_t count_trainable(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var.value().size() * (p.real_valued ? 1 : 2);
    return n;
}

void append(ParameterList& into, const ParameterList& from) {
    into.insert(into.end(), from.begin(), from.end());
}

void append(BufferList& into, const BufferList& from) {
    into.insert(into.end(), from.begin(), from.end());
}

// ---- unitary initialisation -----------------------------------------------

namespace {

using cd = std::complex<double>;

// Orthonormalises `count` vectors of length `len` stored contiguously, by two
// passes of modified Gram-Schmidt (numerically a QR factorisation).
void orthonormalise(std::vector<cd>& v, std::size_t count, std::size_t len) {
    for (std::size_t i = 0; i < count; ++i) {
        cd* vi = v.data() + i * len;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < i; ++j) {
                const cd* vj = v.data() + j * len;
                cd proj = 0.0;
                for (std::size_t k = 0; k < len; ++k) proj += std::conj(vj[k]) * vi[k];
                for (std::size_t k = 0; k < len; ++k) vi[k] -= proj * vj[k];
            }
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < len; ++k) norm += std::norm(vi[k]);
        norm = std::sqrt(norm);
        if (norm == 0.0) throw NumericalError("unitary init: degenerate random draw");
        for (std::size_t k = 0; k < len; ++k) vi[k] /= norm;
    }
}

}  // namespace

ComplexTensor unitary_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) throw ShapeError("unitary_matrix: empty shape");
    const bool by_rows = rows <= cols;
    const std::size_t count = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<cd> v(count * len);
    for (auto& x : v) {
        const double re = dist(rng);
        const double im = dist(rng);
        x = cd(re, im);
    }
    orthonormalise(v, count, len);
    ComplexTensor out(Shape{rows, cols});
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < len; ++k) {
            const std::size_t r = by_rows ? i : k;
            const std::size_t c = by_rows ? k : i;
            out.set(r * cols + c, v[i * len + k]);
        }
    }
    return out;
}

ComplexTensor unitary_kernel(const Shape& shape, std::uint64_t seed) {
    if (shape.empty()) throw ShapeError("unitary_kernel: empty shape");
    const std::size_t rows = shape[0];
    const std::size_t rest = numel(shape) / rows;
    return unitary_matrix(rows, rest, seed).reshaped(shape);
}

// ---- convolutions -----------------------------------------------------------

ComplexConv2d::ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_t,
                             std::size_t kernel_f, Conv2dGeometry geometry_, std::uint64_t seed, bool with_bias)
    : weight(parameter(unitary_kernel({out_channels, in_channels, kernel_t, kernel_f}, seed))),
      geometry(geometry_) {
    if (with_bias) bias = parameter(ComplexTensor::zeros({out_channels}));
}

ParameterList ComplexConv2d::parameters(const std::string& prefix) const {
    ParameterList out{{prefix + ".weight", weight, false}};
    if (bias.defined()) out.push_back({prefix + ".bias", bias, false});
    return out;
}

ComplexConvTranspose2d::ComplexConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                                               std::size_t kernel_t, std::size_t kernel_f, Conv2dGeometry geometry_,
                                               std::uint64_t seed)
    : weight(parameter(unitary_kernel({in_channels, out_channels, kernel_t, kernel_f}, seed))),
      bias(parameter(ComplexTensor::zeros({out_channels}))),
      geometry(geometry_) {}

ParameterList ComplexConvTranspose2d::parameters(const std::string& prefix) const {
    return {{prefix + ".weight", weight, false}, {prefix + ".bias", bias, false}};
}

// ---- batch normalisation ----------------------------------------------------

namespace {

struct Sym2 {
    double rr, ri, ii;
};

struct Whitening {
    double mean_r, mean_i;
    Sym2 w;  // V^{-1/2}
    Sym2 s;  // V^{1/2}
};

// Closed-form square root and inverse square root of a 2x2 SPD matrix.
Whitening whitening_from(double mean_r, double mean_i, Sym2 v) {
    const double det = v.rr * v.ii - v.ri * v.ri;
    if (!(det > 0.0)) throw NumericalError("complex_batchnorm: covariance is not positive definite");
    const double s = std::sqrt(det);
    const double t = std::sqrt(v.rr + v.ii + 2.0 * s);
    const double inv = 1.0 / (s * t);
    Whitening out{mean_r, mean_i, {(v.ii + s) * inv, -v.ri * inv, (v.rr + s) * inv},
                  {(v.rr + s) / t, v.ri / t, (v.ii + s) / t}};
    return out;
}

// Solves S X + X S = G for a general 2x2 X given symmetric S.
std::array<double, 4> solve_sylvester(const Sym2& s, const std::array<double, 4>& g) {
    const double a = s.rr, b = s.ri, d = s.ii;
    // unknowns: x11, x12, x21, x22
    double m[4][5] = {
        {2 * a, b, b, 0, g[0]},
        {b, a + d, 0, b, g[1]},
        {b, 0, a + d, b, g[2]},
        {0, b, b, 2 * d, g[3]},
    };
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        for (int k = 0; k < 5; ++k) std::swap(m[col][k], m[pivot][k]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int k = col; k < 5; ++k) m[r][k] -= f * m[col][k];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

}  // namespace

Var complex_batchnorm(const Var& x, const Var& gamma, const Var& beta, ComplexTensor& running_mean,
                      ComplexTensor& running_cov, bool training, double momentum, double eps) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("complex_batchnorm: input must be [B, C, T, F], got " + to_string(s));
    const std::size_t batch = s[0], channels = s[1], positions = s[2] * s[3];
    if (gamma.shape() != Shape{3, channels} || beta.shape() != Shape{channels}) {
        throw ShapeError("complex_batchnorm: parameter shapes do not match " + std::to_string(channels) + " channels");
    }
    const std::size_t count = batch * positions;
    if (training && count < 2) {
        throw ContractError("complex_batchnorm: need at least 2 values per channel in training mode");
    }
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    auto at = [&](std::size_t b, std::size_t c, std::size_t p) { return (b * channels + c) * positions + p; };

    std::vector<Whitening> stats(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        if (training) {
            double mr = 0.0, mi = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t p = 0; p < positions; ++p) {
                    mr += xv.re()[at(b, c, p)];
                    mi += xv.im()[at(b, c, p)];
                }
            }
            mr /= static_cast<double>(count);
            mi /= static_cast<double>(count);
            Sym2 v{0.0, 0.0, 0.0};
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t p = 0; p < positions; ++p) {
                    const double ur = xv.re()[at(b, c, p)] - mr;
                    const double ui = xv.im()[at(b, c, p)] - mi;
                    v.rr += ur * ur;
                    v.ri += ur * ui;
                    v.ii += ui * ui;
                }
            }
            v.rr /= static_cast<double>(count);
            v.ri /= static_cast<double>(count);
            v.ii /= static_cast<double>(count);
            running_mean.re()[c] = (1.0 - momentum) * running_mean.re()[c] + momentum * mr;
            running_mean.im()[c] = (1.0 - momentum) * running_mean.im()[c] + momentum * mi;
            running_cov.re()[c] = (1.0 - momentum) * running_cov.re()[c] + momentum * v.rr;
            running_cov.re()[channels + c] = (1.0 - momentum) * running_cov.re()[channels + c] + momentum * v.ri;
            running_cov.re()[2 * channels + c] =
                (1.0 - momentum) * running_cov.re()[2 * channels + c] + momentum * v.ii;
            stats[c] = whitening_from(mr, mi, {v.rr + eps, v.ri, v.ii + eps});
        } else {
            stats[c] = whitening_from(running_mean.re()[c], running_mean.im()[c],
                                      {running_cov.re()[c] + eps, running_cov.re()[channels + c],
                                       running_cov.re()[2 * channels + c] + eps});
        }
    }

    ComplexTensor y(s);
    for (std::size_t c = 0; c < channels; ++c) {
        const auto& st = stats[c];
        const double grr = gv.re()[c], gri = gv.re()[channels + c], gii = gv.re()[2 * channels + c];
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t p = 0; p < positions; ++p) {
                const std::size_t i = at(b, c, p);
                const double ur = xv.re()[i] - st.mean_r;
                const double ui = xv.im()[i] - st.mean_i;
                const double zr = st.w.rr * ur + st.w.ri * ui;
                const double zi = st.w.ri * ur + st.w.ii * ui;
                y.re()[i] = grr * zr + gri * zi + bv.re()[c];
                y.im()[i] = gri * zr + gii * zi + bv.im()[c];
            }
        }
    }

    return make_result(
        std::move(y), {x, gamma, beta},
        [stats = std::move(stats), batch, channels, positions, count, training](Node& self) {
            Node& px = *self.parents[0];
            Node& pg = *self.parents[1];
            Node& pb = *self.parents[2];
            const auto& xv = px.value;
            const auto& gv = pg.value;
            const auto& gy = self.grad;
            auto at = [&](std::size_t b, std::size_t c, std::size_t p) {
                return (b * channels + c) * positions + p;
            };
            const double n = static_cast<double>(count);
            std::vector<double> gur(count), gui(count);
            for (std::size_t c = 0; c < channels; ++c) {
                const auto& st = stats[c];
                const double grr = gv.re()[c], gri = gv.re()[channels + c], gii = gv.re()[2 * channels + c];
                double d_grr = 0, d_gri = 0, d_gii = 0, d_br = 0, d_bi = 0;
                double gw11 = 0, gw12 = 0, gw21 = 0, gw22 = 0;
                std::size_t k = 0;
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t p = 0; p < positions; ++p, ++k) {
                        const std::size_t i = at(b, c, p);
                        const double ur = xv.re()[i] - st.mean_r;
                        const double ui = xv.im()[i] - st.mean_i;
                        const double zr = st.w.rr * ur + st.w.ri * ui;
                        const double zi = st.w.ri * ur + st.w.ii * ui;
                        const double yr = gy.re()[i], yi = gy.im()[i];
                        d_br += yr;
                        d_bi += yi;
                        d_grr += yr * zr;
                        d_gri += yr * zi + yi * zr;
                        d_gii += yi * zi;
                        const double gzr = grr * yr + gri * yi;
                        const double gzi = gri * yr + gii * yi;
                        gw11 += gzr * ur;
                        gw12 += gzr * ui;
                        gw21 += gzi * ur;
                        gw22 += gzi * ui;
                        gur[k] = st.w.rr * gzr + st.w.ri * gzi;
                        gui[k] = st.w.ri * gzr + st.w.ii * gzi;
                    }
                }
                if (pb.requires_grad) {
                    auto& g = pb.grad_buffer();
                    g.re()[c] += d_br;
                    g.im()[c] += d_bi;
                }
                if (pg.requires_grad) {
                    auto& g = pg.grad_buffer();
                    g.re()[c] += d_grr;
                    g.re()[channels + c] += d_gri;
                    g.re()[2 * channels + c] += d_gii;
                }
                if (!px.requires_grad) continue;
                auto& gx = px.grad_buffer();
                if (!training) {
                    k = 0;
                    for (std::size_t b = 0; b < batch; ++b) {
                        for (std::size_t p = 0; p < positions; ++p, ++k) {
                            gx.re()[at(b, c, p)] += gur[k];
                            gx.im()[at(b, c, p)] += gui[k];
                        }
                    }
                    continue;
                }
                // W = V^{-1/2}: gS = -W gW W, then S gV + gV S = gS.
                const Sym2& w = st.w;
                const double a11 = gw11 * w.rr + gw12 * w.ri, a12 = gw11 * w.ri + gw12 * w.ii;
                const double a21 = gw21 * w.rr + gw22 * w.ri, a22 = gw21 * w.ri + gw22 * w.ii;
                const std::array<double, 4> gs{-(w.rr * a11 + w.ri * a21), -(w.rr * a12 + w.ri * a22),
                                               -(w.ri * a11 + w.ii * a21), -(w.ri * a12 + w.ii * a22)};
                const auto gv4 = solve_sylvester(st.s, gs);
                const double v_rr = gv4[0], v_ri = gv4[1] + gv4[2], v_ii = gv4[3];
                double sum_r = 0.0, sum_i = 0.0;
                k = 0;
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t p = 0; p < positions; ++p, ++k) {
                        const std::size_t i = at(b, c, p);
                        const double ur = xv.re()[i] - st.mean_r;
                        const double ui = xv.im()[i] - st.mean_i;
                        gur[k] += (2.0 * v_rr * ur + v_ri * ui) / n;
                        gui[k] += (v_ri * ur + 2.0 * v_ii * ui) / n;
                        sum_r += gur[k];
                        sum_i += gui[k];
                    }
                }
                const double mean_r = sum_r / n, mean_i = sum_i / n;
                k = 0;
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t p = 0; p < positions; ++p, ++k) {
                        gx.re()[at(b, c, p)] += gur[k] - mean_r;
                        gx.im()[at(b, c, p)] += gui[k] - mean_i;
                    }
                }
            }
        },
        training ? "complex_batchnorm_train" : "complex_batchnorm_eval");
}

ComplexBatchNorm::ComplexBatchNorm(std::size_t channels, double momentum_, double eps_)
    : running_mean(Shape{channels}), running_cov(Shape{3, channels}), momentum(momentum_), eps(eps_) {
    ComplexTensor g(Shape{3, channels});
    const double diag = 1.0 / std::sqrt(2.0);
    for (std::size_t c = 0; c < channels; ++c) {
        g.re()[c] = diag;
        g.re()[2 * channels + c] = diag;
        running_cov.re()[c] = 1.0;
        running_cov.re()[2 * channels + c] = 1.0;
    }
    gamma = parameter(std::move(g));
    beta = parameter(ComplexTensor::zeros({channels}));
}

Var ComplexBatchNorm::forward(const Var& x, bool training) {
    return complex_batchnorm(x, gamma, beta, running_mean, running_cov, training, momentum, eps);
}

ParameterList ComplexBatchNorm::parameters(const std::string& prefix) const {
    return {{prefix + ".gamma", gamma, true}, {prefix + ".beta", beta, false}};
}

BufferList ComplexBatchNorm::buffers(const std::string& prefix) {
    return {{prefix + ".running_mean", &running_mean}, {prefix + ".running_cov", &running_cov}};
}

// ---- linear and recurrent ---------------------------------------------------

ComplexLinear::ComplexLinear(std::size_t in_features, std::size_t out_features, std::uint64_t seed)
    : weight(parameter(unitary_matrix(in_features, out_features, seed))),
      bias(parameter(ComplexTensor::zeros({out_features}))) {}

Var ComplexLinear::forward(const Var& x) const {
    const Shape& s = x.shape();
    const std::size_t in = weight.dim(0);
    if (s.empty() || s.back() != in) throw ShapeError("ComplexLinear: last axis must be " + std::to_string(in));
    Shape flat{x.value().size() / in, in};
    Var y = matmul(reshape(x, flat), weight);
    y = add_bias(y, bias, 1);
    Shape out = s;
    out.back() = weight.dim(1);
    return reshape(y, out);
}

ParameterList ComplexLinear::parameters(const std::string& prefix) const {
    return {{prefix + ".weight", weight, false}, {prefix + ".bias", bias, false}};
}

ComplexGru::ComplexGru(std::size_t input_dim_, std::size_t hidden_dim_, std::uint64_t seed)
    : input_dim(input_dim_),
      hidden_dim(hidden_dim_),
      w_z(parameter(unitary_matrix(input_dim_, hidden_dim_, seed))),
      w_r(parameter(unitary_matrix(input_dim_, hidden_dim_, seed + 1))),
      w_h(parameter(unitary_matrix(input_dim_, hidden_dim_, seed + 2))),
      u_z(parameter(unitary_matrix(hidden_dim_, hidden_dim_, seed + 3))),
      u_r(parameter(unitary_matrix(hidden_dim_, hidden_dim_, seed + 4))),
      u_h(parameter(unitary_matrix(hidden_dim_, hidden_dim_, seed + 5))),
      b_z(parameter(ComplexTensor::zeros({hidden_dim_}))),
      b_r(parameter(ComplexTensor::zeros({hidden_dim_}))),
      b_h(parameter(ComplexTensor::zeros({hidden_dim_}))) {}

namespace {

Var gru_update(const Var& xz, const Var& xr, const Var& xh, const Var& h, const ComplexGru& g) {
    Var z = sigmoid_parts(add_bias(add(xz, matmul(h, g.u_z)), g.b_z, 1));
    Var r = sigmoid_parts(add_bias(add(xr, matmul(h, g.u_r)), g.b_r, 1));
    Var c = tanh_parts(add_bias(add(xh, matmul(mul_partwise(r, h), g.u_h)), g.b_h, 1));
    return add(h, mul_partwise(z, sub(c, h)));
}

}  // namespace

Var ComplexGru::step(const Var& x_t, const Var& h) const {
    if (x_t.shape().size() != 2 || x_t.dim(1) != input_dim) {
        throw ShapeError("ComplexGru: input must be [B, " + std::to_string(input_dim) + "], got " +
                         to_string(x_t.shape()));
    }
    if (h.shape() != Shape{x_t.dim(0), hidden_dim}) {
        throw ShapeError("ComplexGru: hidden must be [B, " + std::to_string(hidden_dim) + "], got " +
                         to_string(h.shape()));
    }
    return gru_update(matmul(x_t, w_z), matmul(x_t, w_r), matmul(x_t, w_h), h, *this);
}

Var ComplexGru::forward(const Var& seq) const {
    const Shape& s = seq.shape();
    if (s.size() != 3 || s[2] != input_dim) {
        throw ShapeError("ComplexGru: sequence must be [B, T, " + std::to_string(input_dim) + "], got " +
                         to_string(s));
    }
    const std::size_t batch = s[0], steps = s[1];
    const std::size_t h3 = 3 * hidden_dim;
    // Input projections for every step at once: [B*T, 3H].
    Var proj = matmul(reshape(seq, {batch * steps, input_dim}), concat({w_z, w_r, w_h}, 1));
    proj = reshape(proj, {batch, steps, h3});
    Var h = constant(ComplexTensor::zeros({batch, hidden_dim}));
    std::vector<Var> outputs;
    outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        Var p = reshape(slice(proj, 1, t, 1), {batch, h3});
        h = gru_update(slice(p, 1, 0, hidden_dim), slice(p, 1, hidden_dim, hidden_dim),
                       slice(p, 1, 2 * hidden_dim, hidden_dim), h, *this);
        outputs.push_back(reshape(h, {batch, 1, hidden_dim}));
    }
    return concat(outputs, 1);
}

ParameterList ComplexGru::parameters(const std::string& prefix) const {
    return {{prefix + ".w_z", w_z}, {prefix + ".w_r", w_r}, {prefix + ".w_h", w_h},
            {prefix + ".u_z", u_z}, {prefix + ".u_r", u_r}, {prefix + ".u_h", u_h},
            {prefix + ".b_z", b_z}, {prefix + ".b_r", b_r}, {prefix + ".b_h", b_h}};
}

}  // namespace ctfa
