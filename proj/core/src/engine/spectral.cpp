#include <cmath>
#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"
#include "refcolor/engine/param.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

Parameter& ParamStore::add(const std::string& name, Tensor t, bool spectral, Rng* rng) {
    if (by_name_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter name " + name);
    if (!t.defined()) throw std::invalid_argument("ParamStore: undefined tensor for " + name);
    t.set_requires_grad(true);
    params_.push_back(Parameter{std::move(t), name, {}, spectral});
    Parameter& p = params_.back();
    if (spectral) {
        if (!rng) throw std::invalid_argument("ParamStore: spectral parameter needs an rng for state init");
        const std::int64_t out_dim = p.tensor.shape()[0];
        Tensor u = Tensor::randn({out_dim}, *rng, p.tensor.dtype());
        double norm = 0.0;
        for (std::int64_t i = 0; i < out_dim; ++i) norm += u.value_at(i) * u.value_at(i);
        norm = std::sqrt(norm);
        p.spectral_u = dispatch_dtype(u.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto d = u.data<T>();
            for (auto& v : d) v = static_cast<T>(static_cast<double>(v) / (norm + 1e-12));
            return u;
        });
    }
    by_name_[name] = &p;
    return p;
}

Parameter* ParamStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(&p);
    return out;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void ParamStore::set_requires_grad(bool v) {
    for (auto& p : params_) p.tensor.set_requires_grad(v);
}

namespace {
thread_local bool g_sn_updates = true;
constexpr double kSigmaFloor = 1e-12;
} // namespace

bool spectral_state_updates_enabled() { return g_sn_updates; }

SpectralStateFreezeGuard::SpectralStateFreezeGuard() : prev_(g_sn_updates) { g_sn_updates = false; }
SpectralStateFreezeGuard::~SpectralStateFreezeGuard() { g_sn_updates = prev_; }

Tensor spectral_normalize(Parameter& p, int iters) {
    if (!p.spectral_u.defined())
        throw std::invalid_argument("spectral_normalize: parameter " + p.name + " has no power-iteration state");
    if (iters < 0) throw std::invalid_argument("spectral_normalize: iters must be >= 0");
    const Tensor& w = p.tensor;
    const std::int64_t rows = w.shape()[0];
    const std::int64_t cols = w.numel() / rows;

    Tensor out = make_result(w.shape(), w.dtype());
    // u, v captured for the backward pass; sigma = u^T W v = ||W^T u||.
    auto u_vec = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    auto v_vec = std::make_shared<std::vector<double>>(static_cast<std::size_t>(cols));
    auto sigma_p = std::make_shared<double>(0.0);

    dispatch_dtype(w.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto wv = w.data<T>();
        auto uv = p.spectral_u.data<T>();
        std::vector<double>& u = *u_vec;
        std::vector<double>& v = *v_vec;
        for (std::int64_t i = 0; i < rows; ++i) u[static_cast<std::size_t>(i)] = static_cast<double>(uv[i]);

        auto mul_wt_u = [&]() { // v = W^T u (unnormalized)
            for (std::int64_t j = 0; j < cols; ++j) v[static_cast<std::size_t>(j)] = 0.0;
            for (std::int64_t i = 0; i < rows; ++i) {
                const double ui = u[static_cast<std::size_t>(i)];
                if (ui == 0.0) continue;
                const T* wrow = wv.data() + i * cols;
                for (std::int64_t j = 0; j < cols; ++j)
                    v[static_cast<std::size_t>(j)] += ui * static_cast<double>(wrow[j]);
            }
        };
        auto norm_of = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double a : x) s += a * a;
            return std::sqrt(s);
        };

        // State evolves only during grad-enabled forwards; inference and
        // finite-difference checks see a frozen map.
        const bool update = spectral_state_updates_enabled() && grad_enabled();
        const int n_iter = update ? std::max(iters, 0) : 0;
        for (int it = 0; it < n_iter; ++it) {
            mul_wt_u();
            const double vn = norm_of(v);
            for (auto& a : v) a /= (vn + kSigmaFloor);
            // u = normalize(W v)
            for (std::int64_t i = 0; i < rows; ++i) {
                const T* wrow = wv.data() + i * cols;
                double acc = 0.0;
                for (std::int64_t j = 0; j < cols; ++j)
                    acc += static_cast<double>(wrow[j]) * v[static_cast<std::size_t>(j)];
                u[static_cast<std::size_t>(i)] = acc;
            }
            const double un = norm_of(u);
            for (auto& a : u) a /= (un + kSigmaFloor);
        }
        // Final half-step: v = normalize(W^T u), sigma = ||W^T u||.
        mul_wt_u();
        const double sigma = norm_of(v);
        for (auto& a : v) a /= (sigma + kSigmaFloor);
        *sigma_p = sigma;

        const double inv = 1.0 / std::max(sigma, kSigmaFloor);
        auto ov = out.data<T>();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<T>(static_cast<double>(wv[i]) * inv);

        if (update) {
            auto ustate = p.spectral_u.data<T>();
            for (std::int64_t i = 0; i < rows; ++i) ustate[i] = static_cast<T>(u[static_cast<std::size_t>(i)]);
        }
    });

    Tensor w_in = w;
    wire_backward(out, {w_in}, [w_in, u_vec, v_vec, sigma_p, rows, cols](Node& self) {
        if (!w_in.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            auto y = self.buf<T>(); // W / sigma
            w_in.node()->ensure_grad();
            auto gw = w_in.node()->grad_buf<T>();
            const double sigma = std::max(*sigma_p, kSigmaFloor);
            // dW = (G - (sum G .* Wbar) u v^T) / sigma
            double gdoty = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                gdoty += static_cast<double>(g[i]) * static_cast<double>(y[i]);
            const auto& u = *u_vec;
            const auto& v = *v_vec;
            for (std::int64_t i = 0; i < rows; ++i) {
                const double ui = u[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < cols; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i * cols + j);
                    const double grad =
                        (static_cast<double>(g[k]) - gdoty * ui * v[static_cast<std::size_t>(j)]) / sigma;
                    gw[k] += static_cast<T>(grad);
                }
            }
        });
    });
    return out;
}

} // namespace refcolor
