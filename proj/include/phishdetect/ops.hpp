// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward operations with reverse-mode rules, covering exactly what the
// three models need. Typed functions are the primary API; forward_op is a
// string-keyed dispatcher over the same kernels.

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phishdetect/tensor.hpp"

namespace phishdetect {

enum class Padding { valid, same };
enum class DropoutMode { train, infer };

// Elementwise and reductions -------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor add_scalar(Tape& tape, const Tensor& a, double value);
Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor tanh_op(Tape& tape, const Tensor& a);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

// Shape manipulation ----------------------------------------------------------

Tensor reshape(Tape& tape, const Tensor& a, Shape new_shape);
Tensor slice(Tape& tape, const Tensor& a, long offset, long length);  // rank-1
Tensor concat(Tape& tape, std::span<const Tensor> parts);             // rank-1

// Linear algebra ---------------------------------------------------------------

// A is {m,k}; b is {k,n} or rank-1 {k}. Result {m,n} or {m}.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Convolution and pooling (CHW layout) -----------------------------------------

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride = 1, Padding padding = Padding::valid);
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, int stride = 1,
              Padding padding = Padding::valid);
Tensor max_pool2d(Tape& tape, const Tensor& input, int window);
Tensor global_max_pool(Tape& tape, const Tensor& input);

// Sequence ops -----------------------------------------------------------------

// Rows of `table` ({V,E}) gathered by index; gradients scatter back.
Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> indices);

struct LstmState {
    Tensor h;
    Tensor c;
};

// One gated recurrence step built from primitive ops. Weight layout: wx is
// {4U,E}, wh is {4U,U}, bias {4U}; gate order i, f, g, o over the rows.
LstmState lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                    const Tensor& wx, const Tensor& wh, const Tensor& bias);

// Fused full-sequence recurrence returning the last hidden state; backward
// is hand-rolled truncated-free BPTT over the cached gates.
Tensor lstm_sequence(Tape& tape, const Tensor& xs, const Tensor& wx, const Tensor& wh,
                     const Tensor& bias);

// Stochastic -------------------------------------------------------------------

// Inverted dropout: inference is identity, training scales survivors by
// 1/(1-rate). Deterministic under the caller's RNG stream.
Tensor dropout(Tape& tape, const Tensor& x, double rate, DropoutMode mode, Rng& rng);

// Losses -----------------------------------------------------------------------

// Binary cross-entropy evaluated from the logit; numerically stable for
// large |logit|. Gradient: sigmoid(logit) - target.
Tensor bce_with_logits(Tape& tape, const Tensor& logit, double target);

// Mean of a list of scalar tensors (loss reduction over a batch).
Tensor mean_of(Tape& tape, std::span<const Tensor> scalars);

// Plain numeric helpers (no tape) ------------------------------------------------

double sigmoid_value(double x);
void softmax_inplace(std::span<double> logits);

// String-keyed dispatcher -----------------------------------------------------

struct OpAttrs {
    std::map<std::string, double> num;
    std::map<std::string, std::string> str;
    std::map<std::string, std::vector<int>> ints;

    double get_num(const std::string& key, double fallback) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
};

// Dispatches `kind` onto the typed kernels above. Throws UnsupportedOpError
// for unknown kinds and ShapeError on incompatible inputs. Ops with more
// than one result (lstm_cell) return their primary output.
Tensor forward_op(Tape& tape, std::string_view kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs = {});

}  // namespace phishdetect
