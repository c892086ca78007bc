#include "wdce/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wdce/rng.hpp"

namespace wdce {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> values, bool req_grad)
    : shape(std::move(s)), data(std::move(values)), requires_grad(req_grad) {
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
    }
    if (data.size() != shape_size(shape)) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    if (requires_grad) grad.assign(data.size(), 0.0);
}

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

TensorPtr Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> values(shape_size(shape), value);
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

TensorPtr Tensor::uniform(Shape shape, double bound, Rng& rng, bool requires_grad) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = rng.uniform(-bound, bound);
    return from_data(std::move(shape), std::move(values), requires_grad);
}

double Tensor::item() const {
    if (data.size() != 1) {
        throw std::logic_error("item() needs a scalar tensor, shape is " + shape_str(shape));
    }
    return data[0];
}

static std::size_t flat_index(const Shape& shape, const std::vector<std::size_t>& index) {
    if (index.size() != shape.size()) {
        throw std::invalid_argument("index rank " + std::to_string(index.size()) +
                                    " does not match tensor rank " + std::to_string(shape.size()));
    }
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
        if (index[a] >= shape[a]) {
            throw std::out_of_range("index " + std::to_string(index[a]) + " out of range for axis " +
                                    std::to_string(a) + " of " + shape_str(shape));
        }
        flat = flat * shape[a] + index[a];
    }
    return flat;
}

double Tensor::at(const std::vector<std::size_t>& index) const { return data[flat_index(shape, index)]; }
double& Tensor::at(const std::vector<std::size_t>& index) { return data[flat_index(shape, index)]; }

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {
thread_local Graph* g_active_graph = nullptr;
}

Graph::~Graph() = default;

Graph::Scope::Scope(Graph& g) : graph_(&g) {
    if (g_active_graph != nullptr) {
        throw std::logic_error("a graph is already active on this thread");
    }
    g_active_graph = graph_;
}

Graph::Scope::~Scope() {
    g_active_graph = nullptr;
}

Graph* Graph::active() { return g_active_graph; }

void Graph::record(std::function<void()> backward_step) {
    consumed_ = false;
    tape_.push_back(std::move(backward_step));
}

void Graph::backward(const TensorPtr& loss) {
    if (!loss) throw std::invalid_argument("backward: null loss tensor");
    if (loss->size() != 1) {
        throw std::invalid_argument("backward expects a scalar loss, shape is " + shape_str(loss->shape));
    }
    if (!loss->requires_grad) {
        throw std::logic_error("backward: loss does not depend on any tracked tensor");
    }
    if (consumed_) {
        throw std::logic_error("backward already ran for this forward pass; run a new forward first");
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    consumed_ = true;
}

void Graph::clear() {
    tape_.clear();
    consumed_ = false;
}

}  // namespace wdce
