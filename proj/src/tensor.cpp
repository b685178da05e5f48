// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace phishdetect {

long shape_numel(const Shape& shape) {
    long n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
        }
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto st = std::make_shared<Storage>();
    st->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    st->shape = std::move(shape);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.storage_->data.begin(), t.storage_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (static_cast<long>(data.size()) != shape_numel(shape)) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto st = std::make_shared<Storage>();
    st->shape = std::move(shape);
    st->data = std::move(data);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    return storage_->shape;
}

long Tensor::size() const {
    return static_cast<long>(storage_->data.size());
}

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
    }
    return storage_->shape[static_cast<std::size_t>(axis)];
}

std::span<const double> Tensor::data() const {
    return storage_->data;
}

std::span<double> Tensor::data_mut() {
    return storage_->data;
}

double Tensor::at(long flat_index) const {
    return storage_->data[static_cast<std::size_t>(flat_index)];
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return storage_->data[0];
}

bool Tensor::requires_grad() const {
    return storage_->requires_grad;
}

void Tensor::set_requires_grad(bool value) {
    storage_->requires_grad = value;
}

bool Tensor::has_grad() const {
    return !storage_->grad.empty();
}

std::span<const double> Tensor::grad() const {
    return storage_->grad;
}

std::span<double> Tensor::grad_mut() const {
    if (storage_->grad.empty()) {
        storage_->grad.assign(storage_->data.size(), 0.0);
    }
    return storage_->grad;
}

void Tensor::zero_grad() const {
    std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> g) const {
    if (g.size() != storage_->data.size()) {
        throw ShapeError("gradient length mismatch for shape " + shape_str(shape()));
    }
    auto dst = grad_mut();
    for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += g[i];
    }
}

bool Tensor::has_nonfinite_data() const {
    return std::any_of(storage_->data.begin(), storage_->data.end(),
                       [](double v) { return !std::isfinite(v); });
}

bool Tensor::has_nonfinite_grad() const {
    return std::any_of(storage_->grad.begin(), storage_->grad.end(),
                       [](double v) { return !std::isfinite(v); });
}

Tensor Tensor::clone() const {
    return from_data(shape(), storage_->data, storage_->requires_grad);
}

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void()> backward) {
    if (!enabled_) {
        return;
    }
    nodes_.push_back(TapeNode{op, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (nodes_.empty()) {
        throw DataError("backward on an empty tape");
    }

    // Interior outputs are transient: reset them so repeated backward calls
    // over the same graph do not double-count. Leaves keep accumulating.
    std::unordered_set<const void*> interior;
    for (const auto& node : nodes_) {
        interior.insert(node.output.storage_id());
    }
    for (auto& node : nodes_) {
        if (node.output.has_grad()) {
            node.output.zero_grad();
        }
        for (auto& in : node.inputs) {
            if (interior.count(in.storage_id()) && in.has_grad()) {
                in.zero_grad();
            }
        }
    }

    Tensor seed = loss;
    seed.grad_mut()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->output.has_grad()) {
            continue;  // not an ancestor of the loss
        }
        it->backward();
    }
}

void Tape::clear() {
    nodes_.clear();
}

}  // namespace phishdetect
