#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wdce {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major double tensor. Gradients accumulate by summation;
/// callers zero them between optimization steps.
class Tensor {
public:
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data once touched, else empty

    Tensor() = default;
    Tensor(Shape s, std::vector<double> values, bool req_grad);

    static TensorPtr zeros(Shape shape, bool requires_grad = false);
    static TensorPtr full(Shape shape, double value, bool requires_grad = false);
    static TensorPtr from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);
    /// Entries uniform in [-bound, bound] drawn from rng.
    static TensorPtr uniform(Shape shape, double bound, class Rng& rng, bool requires_grad = false);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    /// Scalar tensors only.
    double item() const;

    double at(const std::vector<std::size_t>& index) const;
    double& at(const std::vector<std::size_t>& index);

    void ensure_grad();
    void zero_grad();
    bool all_finite() const;
};

/// Tape of executed operations. Ops record themselves onto the thread's
/// active graph; backward replays the tape in exact reverse execution
/// order. A tape can be consumed by backward only once per forward pass.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    ~Graph();

    /// RAII activation: the graph records ops on this thread until the
    /// scope object dies. Scopes must not be nested.
    class Scope {
    public:
        explicit Scope(Graph& g);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Graph* graph_;
    };

    Scope activate() { return Scope(*this); }

    void record(std::function<void()> backward_step);

    /// Seeds d(loss)/d(loss) = 1 and replays the tape backwards.
    /// Throws if called twice without new recorded operations.
    void backward(const TensorPtr& loss);

    /// Discards the tape and re-arms backward for a new forward pass.
    void clear();

    std::size_t op_count() const { return tape_.size(); }
    bool consumed() const { return consumed_; }

    static Graph* active();

private:
    std::vector<std::function<void()>> tape_;
    bool consumed_ = false;
};

}  // namespace wdce
