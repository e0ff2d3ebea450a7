#include "refcolor/engine/tensor.hpp"

#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace refcolor {

void Tensor::backward() {
    if (!defined()) throw std::invalid_argument("backward: undefined tensor");
    if (numel() != 1) throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(shape()));
    if (!requires_grad()) throw std::invalid_argument("backward: loss does not require grad");

    using detail::Node;

    // Iterative post-order DFS over parents gives a topological order.
    std::vector<std::shared_ptr<Node>> topo;
    std::unordered_set<Node*> visited;
    struct Frame {
        std::shared_ptr<Node> node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_, 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            auto& p = f.node->parents[f.next_parent++];
            if (p->requires_grad && visited.insert(p.get()).second) stack.push_back({p, 0});
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        node_->grad_buf<T>()[0] = static_cast<T>(1.0);
    });

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node& n = **it;
        if (n.backward_fn) {
            if (!n.has_grad()) n.ensure_grad();
            n.backward_fn(n);
            // The graph is single-use; release closures and edges as we go.
            n.backward_fn = nullptr;
            n.parents.clear();
        }
    }
}

} // namespace refcolor
