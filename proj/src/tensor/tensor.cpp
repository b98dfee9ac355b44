#include "scl/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "scl/errors.hpp"

namespace scl {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void detail::Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

detail::Node& Tensor::node() const {
    if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return node().data.size(); }

std::span<double> Tensor::data() { return node().data; }
std::span<const double> Tensor::data() const { return node().data; }

std::span<const double> Tensor::grad() const {
    auto& n = node();
    n.ensure_grad();
    return n.grad;
}

std::span<double> Tensor::mutable_grad() {
    auto& n = node();
    n.ensure_grad();
    return n.grad;
}

bool Tensor::has_grad() const { return !node().grad.empty(); }

void Tensor::zero_grad() {
    auto& n = node();
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return node().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    node().requires_grad = on;
    return *this;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("Tensor::item: tensor of shape " + shape_str(shape()) +
                         " is not a scalar");
    }
    return node().data[0];
}

Tensor Tensor::detach() const { return from(shape(), node().data, false); }

Tensor Tensor::clone() const { return from(shape(), node().data, requires_grad()); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
    Tensor out = from(std::move(shape), std::move(values), false);
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
        auto& n = out.node();
        n.requires_grad = true;
        n.parents.reserve(inputs.size());
        for (auto& t : inputs) n.parents.push_back(t.node_);
        n.backward_fn = std::move(backward_fn);
    }
    return out;
}

void Tensor::backward() const {
    auto& root = node();
    if (root.data.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    seen.insert(&root);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (auto* n : order) {
        if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
    }
    root.ensure_grad();
    root.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

std::size_t count_scalars(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.numel();
    return n;
}

}  // namespace scl
