#include "refcolor/engine/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refcolor/engine/param.hpp"

namespace refcolor {

GradCheckResult gradcheck(const std::function<Tensor()>& forward,
                          const std::vector<std::pair<std::string, Tensor>>& leaves,
                          const GradCheckOpts& opts) {
    for (const auto& [name, t] : leaves) {
        if (!t.defined()) throw std::invalid_argument("gradcheck: undefined leaf " + name);
        if (t.dtype() != DType::F64)
            throw std::invalid_argument("gradcheck: leaf " + name + " must be f64");
        if (!t.requires_grad())
            throw std::invalid_argument("gradcheck: leaf " + name + " must require grad");
    }

    // Power-iteration state must stay frozen so the forward map is a fixed
    // function of the leaves during differencing.
    SpectralStateFreezeGuard freeze;

    for (const auto& [name, t] : leaves) {
        Tensor handle = t;
        handle.zero_grad();
    }
    Tensor loss = forward();
    if (loss.numel() != 1) throw std::invalid_argument("gradcheck: forward must return a scalar");
    loss.backward();

    // Snapshot analytic gradients before the FD loop perturbs anything.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& [name, t] : leaves) {
        std::vector<double> g(static_cast<std::size_t>(t.numel()), 0.0);
        if (t.has_grad()) {
            auto gs = t.grad_data<double>();
            std::copy(gs.begin(), gs.end(), g.begin());
        }
        analytic.push_back(std::move(g));
    }

    GradCheckResult res;
    Rng coord_rng(opts.coord_seed);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const auto& name = leaves[li].first;
        Tensor t = leaves[li].second;
        auto data = t.data<double>();
        const std::int64_t n = t.numel();

        std::vector<std::int64_t> coords;
        if (opts.max_coords_per_leaf > 0 && n > opts.max_coords_per_leaf) {
            for (std::int64_t k = 0; k < opts.max_coords_per_leaf; ++k)
                coords.push_back(coord_rng.uniform_int(0, n - 1));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        } else {
            coords.resize(static_cast<std::size_t>(n));
            for (std::int64_t k = 0; k < n; ++k) coords[static_cast<std::size_t>(k)] = k;
        }

        for (std::int64_t idx : coords) {
            const double orig = data[static_cast<std::size_t>(idx)];
            const double a = analytic[li][static_cast<std::size_t>(idx)];
            auto rel_at = [&](double h) {
                double fp = 0.0, fm = 0.0;
                {
                    NoGradGuard ng;
                    data[static_cast<std::size_t>(idx)] = orig + h;
                    fp = forward().item();
                    data[static_cast<std::size_t>(idx)] = orig - h;
                    fm = forward().item();
                    data[static_cast<std::size_t>(idx)] = orig;
                }
                const double numeric = (fp - fm) / (2.0 * h);
                const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
                return std::abs(a - numeric) / denom;
            };
            double rel = rel_at(opts.h);
            double h = opts.h;
            for (int r = 0; r < opts.refinements && rel > opts.tol; ++r) {
                h /= 10.0;
                rel = std::min(rel, rel_at(h));
            }
            ++res.checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_leaf = name;
                res.worst_index = idx;
            }
        }
    }
    return res;
}

} // namespace refcolor
