#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "uwpose/tensor.hpp"

namespace uwpose::ad {

// Elementwise. Binary ops accept identical shapes, or one operand holding a
// single element (scalar broadcast). Nothing else broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);  // relu'(0) = 0
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Reductions to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// [N,D] -> [N], Euclidean norm of every row. The gradient at a zero row is 0.
Tensor row_l2_norm(const Tensor& a);

// [N,D] x [D,M] + [M] -> [N,M]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Cross-correlation: [N,C,H,W] * [F,C,kH,kW] + [F] -> [N,F,H',W'],
// H' = (H + 2*padding - kH) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Window `size`, step `stride`, no padding. Ties route the gradient to the
// first maximal element in row-major window order.
Tensor maxpool2d(const Tensor& input, std::size_t size, std::size_t stride);
// [N,C,H,W] -> [N,C]
Tensor global_avgpool(const Tensor& input);

Tensor reshape(const Tensor& a, Shape shape);
// [N,...] -> [N, prod(...)]
Tensor flatten(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// [N,C,H,W] -> [N,C], the feature vector at grid cell (row, col).
Tensor gather_cell(const Tensor& feature_map, std::size_t row, std::size_t col);

// Gate layout along the 4*Dh axis is (input, forget, cell, output).
struct LstmParams {
  Tensor w_input;   // [Din, 4*Dh]
  Tensor w_hidden;  // [Dh, 4*Dh]
  Tensor bias;      // [4*Dh]

  std::size_t input_size() const { return w_input.dim(0); }
  std::size_t hidden_size() const { return w_hidden.dim(0); }
};

struct LstmState {
  Tensor h;  // [N,Dh]
  Tensor c;  // [N,Dh]
};

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& params);

}  // namespace uwpose::ad
