#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cht::nn {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Adds this node's grad into its parents' grads. Empty for leaves.
    std::function<void(TensorNode&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    std::vector<T>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }
};

// Dense row-major tensor handle. Copies share storage; use clone() for a deep copy.
template <typename T>
class BasicTensor {
public:
    using Node = TensorNode<T>;

    BasicTensor() = default;
    explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
    static BasicTensor scalar(T value) { return from({}, {value}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t dim(int i) const { return node_->shape.at(i); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

    std::span<T> data() { return node_->value; }
    std::span<const T> data() const { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->ensure_grad(); }
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    // Same values, no history.
    BasicTensor detach() const { return from(shape(), node_->value, false); }
    BasicTensor clone() const { return detach(); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Builds an op result. The node keeps `parents` and `backward_fn` only when some parent
// requires grad, so inference builds no graph.
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> value,
                           std::vector<std::shared_ptr<TensorNode<T>>> parents,
                           std::function<void(TensorNode<T>&)> backward_fn);

// Reverse-mode sweep from a scalar root. Leaf grads accumulate across calls; interior
// grads are recomputed. Throws DomainError for a non-scalar root.
template <typename T>
void backward(const BasicTensor<T>& root);

template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t) {
    std::vector<To> v(t.data().begin(), t.data().end());
    return BasicTensor<To>::from(t.shape(), std::move(v), t.requires_grad());
}

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace cht::nn
