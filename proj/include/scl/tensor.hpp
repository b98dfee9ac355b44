#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad, accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    void ensure_grad();
};

}  // namespace detail

// Dense row-major array of doubles with optional participation in a
// reverse-mode gradient tape. Copies share the underlying node; use
// clone() or detach() for an independent value.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t numel() const;

    std::span<double> data();
    std::span<const double> data() const;
    // Gradient buffer; zero-filled view of the right size if nothing has
    // been accumulated yet.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    bool has_grad() const;
    void zero_grad();

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);

    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    // Independent value copy outside any graph.
    Tensor detach() const;
    // Independent copy that keeps the requires_grad flag (for parameters).
    Tensor clone() const;

    // Populates grads of every participating tensor. Leaf gradients
    // accumulate across calls; interior gradients are reset per call.
    void backward() const;

    // Internal: used by op implementations.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward_fn);
    detail::Node& node() const;
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

// A trainable tensor with a stable name (checkpoint key, error messages).
struct Parameter {
    std::string name;
    Tensor value;
};

using ParameterList = std::vector<Parameter>;

std::size_t count_scalars(const ParameterList& params);

}  // namespace scl
