#include "refcolor/engine/optim.hpp"

#include <cmath>

namespace refcolor {

void Adam::step(const std::vector<Parameter*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
        if (!p->tensor.has_grad()) continue;
        Slot& slot = state_[p->name];
        const auto n = static_cast<std::size_t>(p->tensor.numel());
        if (slot.m.empty()) {
            slot.m.assign(n, 0.0);
            slot.v.assign(n, 0.0);
        }
        dispatch_dtype(p->tensor.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto w = p->tensor.data<T>();
            auto g = p->tensor.grad_data<T>();
            for (std::size_t i = 0; i < n; ++i) {
                const double gi = static_cast<double>(g[i]);
                slot.m[i] = opts_.beta1 * slot.m[i] + (1.0 - opts_.beta1) * gi;
                slot.v[i] = opts_.beta2 * slot.v[i] + (1.0 - opts_.beta2) * gi * gi;
                const double mhat = slot.m[i] / bc1;
                const double vhat = slot.v[i] / bc2;
                w[i] = static_cast<T>(static_cast<double>(w[i]) -
                                      opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps));
            }
        });
    }
}

} // namespace refcolor
