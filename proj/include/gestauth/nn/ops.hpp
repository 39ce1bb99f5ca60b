#pragma once

#include <vector>

#include "gestauth/nn/graph.hpp"

namespace gestauth::nn {

enum class Padding { same, valid };

/// x [..., in] @ W [in, out] + b [out]; leading dimensions are batch rows.
Id dense(Graph& g, Id x, Id W, Id b);

/// 1-D cross-correlation over x [B, T, Cin] with W [k, Cin, Cout] and b [Cout]:
/// y[t] = sum_j W[j] . x[t + j - floor(k/2)], zero-padded for `same`.
Id conv1d(Graph& g, Id x, Id W, Id b, Padding padding);

/// Max pooling over time with ceil semantics, so a trailing partial window
/// yields an output step (e.g. 25 -> 13).
Id maxpool1d(Graph& g, Id x, std::size_t window = 2, std::size_t stride = 2);

/// Nearest-neighbour upsampling over time.
Id upsample1d(Graph& g, Id x, std::size_t factor = 2);

/// Gated recurrent unit over x [B, T, in]. Wx [in, 3h], Wh [h, 3h], bx/bh
/// [3h], gate blocks ordered (update, reset, candidate); the reset gate is
/// applied after the recurrent matmul. Returns [B, T, h] or the final state [B, h].
Id gru(Graph& g, Id x, Id Wx, Id Wh, Id bx, Id bh, bool return_sequences);

Id relu(Graph& g, Id x);
Id sigmoid(Graph& g, Id x);
Id tanh(Graph& g, Id x);

/// Concatenation along the last axis.
Id concat(Graph& g, const std::vector<Id>& parts);
/// [B, ...] -> [B, prod(...)].
Id flatten(Graph& g, Id x);
/// [B, d] -> [B, steps, d].
Id repeat_steps(Graph& g, Id x, std::size_t steps);
/// Columns [begin, end) of the last axis.
Id slice_last(Graph& g, Id x, std::size_t begin, std::size_t end);
Id add(Graph& g, Id a, Id b);

double sigmoid(double x);

}  // namespace gestauth::nn
