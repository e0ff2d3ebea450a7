#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refcolor/engine/dtype.hpp"
#include "refcolor/engine/rng.hpp"

namespace refcolor {

class Tensor;

namespace detail {

struct Node {
    std::vector<std::int64_t> shape;
    std::int64_t numel = 0;
    DType dtype = DType::F64;
    bool requires_grad = false;

    std::vector<float> data_f32;
    std::vector<double> data_f64;
    std::vector<float> grad_f32;
    std::vector<double> grad_f64;

    // Inputs kept alive for the backward pass; cleared once consumed.
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    template <class T> std::span<T> buf();
    template <class T> std::span<const T> buf() const;
    template <class T> std::span<T> grad_buf();
    bool has_grad() const;
    void ensure_grad();
    void clear_grad();
};

template <> inline std::span<float> Node::buf<float>() { return {data_f32.data(), data_f32.size()}; }
template <> inline std::span<double> Node::buf<double>() { return {data_f64.data(), data_f64.size()}; }
template <> inline std::span<const float> Node::buf<float>() const { return {data_f32.data(), data_f32.size()}; }
template <> inline std::span<const double> Node::buf<double>() const { return {data_f64.data(), data_f64.size()}; }
template <> inline std::span<float> Node::grad_buf<float>() { return {grad_f32.data(), grad_f32.size()}; }
template <> inline std::span<double> Node::grad_buf<double>() { return {grad_f64.data(), grad_f64.size()}; }

} // namespace detail

// Thread-local autograd mode. Ops record a backward function only while
// grad mode is enabled and some input requires grad.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// An n-dimensional numeric array participating in reverse-mode
// differentiation. Value-semantic handle to shared storage; data is immutable
// after creation, only gradient buffers accumulate.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, DType dt, bool requires_grad = false);
    static Tensor full(std::vector<std::int64_t> shape, double value, DType dt);
    static Tensor scalar(double value, DType dt);
    static Tensor from_data(std::vector<std::int64_t> shape, std::span<const double> values, DType dt,
                            bool requires_grad = false);
    static Tensor from_data(std::vector<std::int64_t> shape, std::span<const float> values, DType dt,
                            bool requires_grad = false);
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, DType dt, double stddev = 1.0,
                        bool requires_grad = false);
    static Tensor rand_uniform(std::vector<std::int64_t> shape, Rng& rng, DType dt, double lo, double hi,
                               bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::int64_t>& shape() const;
    std::int64_t dim(int i) const;
    int ndim() const;
    std::int64_t numel() const;
    DType dtype() const;

    bool requires_grad() const;
    void set_requires_grad(bool v);

    template <class T> std::span<T> data() { return node_->buf<T>(); }
    template <class T> std::span<const T> data() const { return static_cast<const detail::Node*>(node_.get())->buf<T>(); }

    // Converting element accessors (convenience; not for hot loops).
    double value_at(std::int64_t flat_index) const;
    double item() const;
    std::vector<double> to_vector() const;

    // Detached value copy (no graph, no grad requirement).
    Tensor detach() const;
    Tensor cast(DType dt) const;

    // Reverse-mode differentiation from a scalar. Populates grad for every
    // tensor in the graph that requires grad, then releases the graph.
    void backward();

    bool has_grad() const;
    Tensor grad() const; // detached copy of the gradient (empty tensor if none)
    template <class T> std::span<const T> grad_data() const { return node_->grad_buf<T>(); }
    void zero_grad();

    // Raw node access for op implementations.
    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }

  private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);
std::string shape_str(const std::vector<std::int64_t>& shape);

namespace detail {

// Allocates an uninitialized (zeroed) result node.
Tensor make_result(std::vector<std::int64_t> shape, DType dt);

// Wires the backward function if grad mode is on and any input requires grad.
// `fn` receives the output node; it must accumulate into the inputs' grads.
void wire_backward(Tensor& out, const std::vector<Tensor>& inputs, std::function<void(Node&)> fn);

// Accumulates `g` into the node's grad buffer (no-op unless requires_grad).
template <class T>
void accumulate_grad(Node& n, std::span<const T> g) {
    if (!n.requires_grad) return;
    n.ensure_grad();
    auto dst = n.grad_buf<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

} // namespace detail

} // namespace refcolor
