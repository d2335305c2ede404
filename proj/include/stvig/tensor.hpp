#pragma once

#include <cstdint>
#include <initializer_list>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stvig {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

[[noreturn]] inline void throw_shape_error(const std::string& what, const Shape& a, const Shape& b) {
    throw std::invalid_argument(what + ": " + shape_str(a) + " vs " + shape_str(b));
}

/// Thread-local switch: when disabled, ops produce plain values and record
/// no graph, regardless of requires_grad on the inputs.
struct GradMode {
    static bool& enabled() {
        thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Dense row-major tensor with reverse-mode gradient recording.
///
/// A tensor produced by an op keeps shared ownership of its inputs plus a
/// closure that routes the output gradient back to them; backward() walks
/// that DAG in reverse topological order. Shape is fixed at construction.
template <typename S>
class Tensor : public std::enable_shared_from_this<Tensor<S>> {
  public:
    using Ptr = std::shared_ptr<Tensor<S>>;
    using BackwardFn = std::function<void(Tensor<S>&)>;

    static Ptr make(Shape shape, bool requires_grad = false) {
        auto t = Ptr(new Tensor<S>(std::move(shape)));
        t->requires_grad_ = requires_grad;
        return t;
    }

    static Ptr make(Shape shape, std::vector<S> data, bool requires_grad = false) {
        auto t = Ptr(new Tensor<S>(std::move(shape)));
        if (static_cast<std::int64_t>(data.size()) != t->size_) {
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(t->shape_));
        }
        t->data_ = std::move(data);
        t->requires_grad_ = requires_grad;
        return t;
    }

    static Ptr make(Shape shape, std::initializer_list<S> data, bool requires_grad = false) {
        return make(std::move(shape), std::vector<S>(data), requires_grad);
    }

    static Ptr full(Shape shape, S value, bool requires_grad = false) {
        auto t = make(std::move(shape), requires_grad);
        std::fill(t->data_.begin(), t->data_.end(), value);
        return t;
    }

    static Ptr scalar(S value, bool requires_grad = false) {
        return make(Shape{1}, std::vector<S>{value}, requires_grad);
    }

    /// Uniform fill in [lo, hi) from the caller's engine.
    static Ptr uniform(Shape shape, S lo, S hi, std::mt19937_64& rng, bool requires_grad = false) {
        auto t = make(std::move(shape), requires_grad);
        std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
        for (auto& v : t->data_) v = static_cast<S>(dist(rng));
        return t;
    }

    /// Result node of a recorded op. Parents and the gradient closure are
    /// dropped when grad mode is off or no parent needs gradients.
    static Ptr make_op(Shape shape, std::vector<S> data, std::vector<Ptr> parents, BackwardFn fn) {
        bool track = GradMode::enabled();
        if (track) {
            bool any = false;
            for (const auto& p : parents) any = any || p->requires_grad_;
            track = any;
        }
        auto t = make(std::move(shape), std::move(data), track);
        if (track) {
            t->parents_ = std::move(parents);
            t->backward_fn_ = std::move(fn);
        }
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return size_; }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t rank() const { return shape_.size(); }

    std::span<S> data() { return {data_.data(), static_cast<std::size_t>(size_)}; }
    std::span<const S> data() const { return {data_.data(), static_cast<std::size_t>(size_)}; }
    S& at(std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    S at(std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
    S item() const {
        if (size_ != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    bool requires_grad() const { return requires_grad_; }
    bool has_grad() const { return !grad_.empty(); }

    /// Gradient buffer, allocated (zeroed) on first touch.
    std::span<S> grad() {
        if (grad_.empty()) grad_.assign(static_cast<std::size_t>(size_), S(0));
        return {grad_.data(), static_cast<std::size_t>(size_)};
    }

    void zero_grad() {
        if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), S(0));
    }

    void accumulate_grad(std::span<const S> g) {
        auto mine = grad();
        for (std::int64_t i = 0; i < size_; ++i) mine[i] += g[i];
    }

    const std::vector<Ptr>& parents() const { return parents_; }
    bool is_leaf() const { return !backward_fn_; }

    /// Reverse-mode propagation from this tensor, which must be scalar.
    /// Seeds d(this)/d(this) = 1 and accumulates into every reachable
    /// requires_grad tensor; repeated calls keep accumulating.
    void backward() {
        if (size_ != 1) {
            throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(shape_));
        }
        std::vector<Tensor<S>*> order;
        std::unordered_set<Tensor<S>*> seen;
        std::vector<std::pair<Tensor<S>*, std::size_t>> stack;
        stack.emplace_back(this, 0);
        seen.insert(this);
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents_.size()) {
                Tensor<S>* p = node->parents_[next].get();
                ++next;
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        // interior gradients are per-pass scratch; only leaves accumulate
        // across repeated backward calls
        for (Tensor<S>* node : order)
            if (node->backward_fn_) node->zero_grad();
        grad()[0] += S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Tensor<S>* node = *it;
            if (node->backward_fn_) node->backward_fn_(*node);
        }
    }

    Tensor(const Tensor&) = delete;
    Tensor& operator=(const Tensor&) = delete;

  private:
    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), size_(stvig::numel(shape_)),
          data_(static_cast<std::size_t>(size_), S(0)) {}

    Shape shape_;
    std::int64_t size_ = 0;
    std::vector<S> data_;
    bool requires_grad_ = false;
    std::vector<S> grad_;
    std::vector<Ptr> parents_;
    BackwardFn backward_fn_;
};

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <typename S>
void backward(const TensorPtr<S>& loss) {
    loss->backward();
}

}  // namespace stvig
