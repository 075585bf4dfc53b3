#include "ctfa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ctfa {

namespace {
double evaluate(const std::function<Var()>& loss_fn) {
    NoGradScope no_grad;
    return loss_fn().value().re()[0];
}
}  // namespace

GradCheckResult check_gradients(std::string name, std::vector<Var> leaves, const std::function<Var()>& loss_fn,
                                const GradCheckOptions& options) {
    GradCheckResult result;
    result.name = std::move(name);

    std::vector<ComplexTensor> analytic;
    {
        for (auto& leaf : leaves) leaf.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        Var loss = loss_fn();
        tape.backward(loss);
        for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
    }

    const double eps = options.epsilon;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        ComplexTensor& value = leaves[l].mutable_value();
        const std::size_t n = value.size();
        const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, options.max_entries_per_leaf));
        for (std::size_t i = 0; i < n; i += stride) {
            for (int part = 0; part < 2; ++part) {
                double& slot = part == 0 ? value.re()[i] : value.im()[i];
                const double saved = slot;
                slot = saved + eps;
                const double plus = evaluate(loss_fn);
                slot = saved - eps;
                const double minus = evaluate(loss_fn);
                slot = saved;
                const double numeric = (plus - minus) / (2.0 * eps);
                const double exact = part == 0 ? analytic[l].re()[i] : analytic[l].im()[i];
                const double denom = std::max({std::abs(exact), std::abs(numeric), options.floor});
                result.max_rel_error = std::max(result.max_rel_error, std::abs(exact - numeric) / denom);
                ++result.checked;
            }
        }
    }
    result.passed = std::isfinite(result.max_rel_error) && result.max_rel_error <= options.tolerance;
    return result;
}

}  // namespace ctfa
