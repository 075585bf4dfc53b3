#include "kernels.hpp"

#include <Eigen/Core>

namespace ctfa::kernels {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double* c) {
    if (alpha == 0.0 || m == 0 || n == 0 || k == 0) return;
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const Mat>;
    const auto em = Eigen::Index(m), en = Eigen::Index(n), ek = Eigen::Index(k);
    Eigen::Map<Mat> cm(c, em, en);
    // stored row-major: A is m x k (or k x m when transposed), B is k x n (or n x k)
    const CMap am(a, trans_a ? ek : em, trans_a ? em : ek);
    const CMap bm(b, trans_b ? en : ek, trans_b ? ek : en);
    if (!trans_a && !trans_b) cm.noalias() += alpha * am * bm;
    else if (!trans_a) cm.noalias() += alpha * am * bm.transpose();
    else if (!trans_b) cm.noalias() += alpha * am.transpose() * bm;
    else cm.noalias() += alpha * am.transpose() * bm.transpose();
}

namespace {
bool transposed(Op op) {
    return op == Op::T || op == Op::H;
}
double conj_sign(Op op) {
    return (op == Op::H || op == Op::C) ? -1.0 : 1.0;
}
}  // namespace

void cgemm(Op op_a, Op op_b, Mode mode, std::size_t m, std::size_t n, std::size_t k, CPlanes a, CPlanes b,
           MutPlanes c) {
    const bool ta = transposed(op_a);
    const bool tb = transposed(op_b);
    const double sa = conj_sign(op_a);
    const double sb = conj_sign(op_b);
    switch (mode) {
        case Mode::Complex:
            gemm(ta, tb, m, n, k, 1.0, a.re, b.re, c.re);
            gemm(ta, tb, m, n, k, -sa * sb, a.im, b.im, c.re);
            gemm(ta, tb, m, n, k, sb, a.re, b.im, c.im);
            gemm(ta, tb, m, n, k, sa, a.im, b.re, c.im);
            break;
        case Mode::Partwise:
            gemm(ta, tb, m, n, k, 1.0, a.re, b.re, c.re);
            gemm(ta, tb, m, n, k, 1.0, a.im, b.im, c.im);
            break;
        case Mode::RealLeft:
            gemm(ta, tb, m, n, k, 1.0, a.re, b.re, c.re);
            gemm(ta, tb, m, n, k, sb, a.re, b.im, c.im);
            break;
    }
}

}  // namespace ctfa::kernels
