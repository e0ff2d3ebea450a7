#include "refcolor/engine/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace refcolor {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor shape extents must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

bool Node::has_grad() const {
    return dtype == DType::F32 ? !grad_f32.empty() : !grad_f64.empty();
}

void Node::ensure_grad() {
    if (dtype == DType::F32) {
        if (grad_f32.empty()) grad_f32.assign(static_cast<std::size_t>(numel), 0.0f);
    } else {
        if (grad_f64.empty()) grad_f64.assign(static_cast<std::size_t>(numel), 0.0);
    }
}

void Node::clear_grad() {
    std::fill(grad_f32.begin(), grad_f32.end(), 0.0f);
    std::fill(grad_f64.begin(), grad_f64.end(), 0.0);
}

Tensor make_result(std::vector<std::int64_t> shape, DType dt) {
    auto n = std::make_shared<Node>();
    n->numel = shape_numel(shape);
    n->shape = std::move(shape);
    n->dtype = dt;
    if (dt == DType::F32)
        n->data_f32.assign(static_cast<std::size_t>(n->numel), 0.0f);
    else
        n->data_f64.assign(static_cast<std::size_t>(n->numel), 0.0);
    return Tensor::wrap(std::move(n));
}

void wire_backward(Tensor& out, const std::vector<Tensor>& inputs, std::function<void(Node&)> fn) {
    if (!grad_enabled()) return;
    bool any = false;
    for (const auto& in : inputs)
        if (in.defined() && in.requires_grad()) any = true;
    if (!any) return;
    auto* n = out.node();
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs)
        if (in.defined()) n->parents.push_back(in.node_ptr());
    n->backward_fn = std::move(fn);
}

} // namespace detail

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(std::vector<std::int64_t> shape, DType dt, bool requires_grad) {
    Tensor t = detail::make_result(std::move(shape), dt);
    t.node()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value, DType dt) {
    Tensor t = detail::make_result(std::move(shape), dt);
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        std::fill(d.begin(), d.end(), static_cast<T>(value));
    });
    return t;
}

Tensor Tensor::scalar(double value, DType dt) { return full({1}, value, dt); }

Tensor Tensor::from_data(std::vector<std::int64_t> shape, std::span<const double> values, DType dt,
                         bool requires_grad) {
    Tensor t = detail::make_result(std::move(shape), dt);
    if (static_cast<std::int64_t>(values.size()) != t.numel())
        throw std::invalid_argument("from_data: value count does not match shape " + shape_str(t.shape()));
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
    });
    t.node()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape, std::span<const float> values, DType dt,
                         bool requires_grad) {
    Tensor t = detail::make_result(std::move(shape), dt);
    if (static_cast<std::int64_t>(values.size()) != t.numel())
        throw std::invalid_argument("from_data: value count does not match shape " + shape_str(t.shape()));
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
    });
    t.node()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, Rng& rng, DType dt, double stddev, bool requires_grad) {
    Tensor t = detail::make_result(std::move(shape), dt);
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        for (auto& v : d) v = static_cast<T>(rng.normal() * stddev);
    });
    t.node()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::rand_uniform(std::vector<std::int64_t> shape, Rng& rng, DType dt, double lo, double hi,
                            bool requires_grad) {
    Tensor t = detail::make_result(std::move(shape), dt);
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        for (auto& v : d) v = static_cast<T>(rng.uniform(lo, hi));
    });
    t.node()->requires_grad = requires_grad;
    return t;
}

const std::vector<std::int64_t>& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw std::invalid_argument("dim index out of range");
    return node_->shape[static_cast<std::size_t>(i)];
}

int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }

std::int64_t Tensor::numel() const { return node_->numel; }

DType Tensor::dtype() const { return node_->dtype; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
    if (!v && node_->backward_fn)
        throw std::invalid_argument("cannot clear requires_grad on a non-leaf tensor");
    node_->requires_grad = v;
}

double Tensor::value_at(std::int64_t flat_index) const {
    if (flat_index < 0 || flat_index >= numel()) throw std::invalid_argument("value_at: index out of range");
    return dispatch_dtype(dtype(), [&](auto tag) -> double {
        using T = decltype(tag);
        return static_cast<double>(data<T>()[static_cast<std::size_t>(flat_index)]);
    });
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(numel()) + " elements");
    return value_at(0);
}

std::vector<double> Tensor::to_vector() const {
    std::vector<double> out(static_cast<std::size_t>(numel()));
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto d = data<T>();
        for (std::size_t i = 0; i < d.size(); ++i) out[i] = static_cast<double>(d[i]);
    });
    return out;
}

Tensor Tensor::detach() const {
    Tensor t = detail::make_result(node_->shape, node_->dtype);
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = data<T>();
        auto dst = t.data<T>();
        std::copy(src.begin(), src.end(), dst.begin());
    });
    return t;
}

Tensor Tensor::cast(DType dt) const {
    if (dt == dtype()) return detach();
    Tensor t = detail::make_result(node_->shape, dt);
    auto vals = to_vector();
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto dst = t.data<T>();
        for (std::size_t i = 0; i < vals.size(); ++i) dst[i] = static_cast<T>(vals[i]);
    });
    return t;
}

bool Tensor::has_grad() const { return node_ && node_->has_grad(); }

Tensor Tensor::grad() const {
    if (!has_grad()) return {};
    Tensor t = detail::make_result(node_->shape, node_->dtype);
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = node_->grad_buf<T>();
        auto dst = t.data<T>();
        std::copy(src.begin(), src.end(), dst.begin());
    });
    return t;
}

void Tensor::zero_grad() {
    if (node_) node_->clear_grad();
}

} // namespace refcolor
