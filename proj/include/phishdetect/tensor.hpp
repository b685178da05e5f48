// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensor with shared storage and the reverse-mode tape. Training
// arithmetic is 64-bit; 32-bit only appears in persisted weight archives.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/common.hpp"

namespace phishdetect {

using Shape = std::vector<int>;

long shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Value-semantics handle onto shared storage. Copying a Tensor aliases the
// same buffer; ops never write through their inputs. In-place mutation is
// reserved for parameter updates (optimizer) and explicit fills.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return storage_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    long size() const;
    int dim(int axis) const;

    std::span<const double> data() const;
    std::span<double> data_mut();
    double at(long flat_index) const;
    double item() const;  // scalar only

    bool requires_grad() const;
    void set_requires_grad(bool value);

    // Gradient buffer; allocated lazily on first accumulate.
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> grad_mut() const;
    void zero_grad() const;
    void accumulate_grad(std::span<const double> g) const;

    bool has_nonfinite_data() const;
    bool has_nonfinite_grad() const;

    // Deep copy of data (and requires_grad flag); grad not copied.
    Tensor clone() const;

    // Identity of the underlying buffer; keys optimizer state.
    const void* storage_id() const { return storage_.get(); }
    bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

private:
    struct Storage {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulate
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> storage_;

    explicit Tensor(std::shared_ptr<Storage> s) : storage_(std::move(s)) {}
};

// One recorded operation: inputs, output, and the rule that accumulates
// input gradients from the output gradient.
struct TapeNode {
    const char* op = "";
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
};

// Append-only record of a forward computation, in topological order by
// construction. Single-threaded during a training step; concurrent workers
// each own a tape.
class Tape {
public:
    explicit Tape(bool enabled = true) : enabled_(enabled) {}

    bool enabled() const { return enabled_; }
    void set_enabled(bool value) { enabled_ = value; }

    void record(const char* op, std::vector<Tensor> inputs, Tensor output,
                std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse, visiting each
    // node exactly once. Interior gradients are reset per call; leaf
    // gradients accumulate until zero_grad. The tape is left intact; call
    // clear() to reuse it.
    void backward(const Tensor& loss);

    void clear();
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

private:
    std::vector<TapeNode> nodes_;
    bool enabled_ = true;
};

}  // namespace phishdetect
