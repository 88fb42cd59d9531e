#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "edgedis/sparse.hpp"
#include "edgedis/tensor.hpp"

namespace edgedis {
namespace ops {

// Dense product a(n,k) * b(k,m). Backward: a.grad += g*b^T, b.grad += a^T*g.
Tensor matmul(const Tensor& a, const Tensor& b);

// h(n,d) * W[:, c0:c1]^T, with c1-c0 == d. The column slice lets one
// parameter matrix hold the stacked blocks of a concatenated input without
// ever materializing the concatenation.
Tensor linear_cols(const Tensor& h, const Tensor& w, int c0, int c1);

// Same product with a constant sparse left operand. The view is shared with
// the recorded backward rule, which may outlive the caller's frame.
Tensor linear_cols(Tape& tape, const std::shared_ptr<const SparseRows>& h, const Tensor& w,
                   int c0, int c1);

// a(n,k) * W[r0:r1, :], with r1-r0 == k.
Tensor matmul_rows(const Tensor& a, const Tensor& w, int r0, int r1);

// Elementwise max(x, slope*x), slope in (0,1).
Tensor leaky_relu(const Tensor& x, double slope);

// Elementwise logistic function, branch-stable for large |x|.
Tensor sigmoid(const Tensor& x);

// Columnwise [a | b]; zero-column operands allowed.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(const std::vector<Tensor>& parts);

// out.row(i) = h.row(idx[i]); backward scatter-adds.
Tensor edge_gather(const Tensor& h, const std::vector<int>& idx);

// Softmax over groups of rows sharing a segment id (scores is e x 1).
// Grouping is positional: rows with equal seg value form one group, any
// order. Per-group max subtraction keeps the exponentials bounded.
Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg, int num_segments);

// out.row(s) = sum over rows i with seg[i]==s of weights(i) * msgs.row(i).
// Segments with no incoming rows stay zero.
Tensor segment_weighted_sum(const Tensor& weights, const Tensor& msgs,
                            const std::vector<int>& seg, int num_segments);

// Mean negative log-likelihood over masked rows, log-sum-exp stabilized.
// targets[i] is consulted only where mask[i] != 0.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             const std::vector<std::uint8_t>& mask);

// Mean of -[t*log p + (1-t)*log(1-p)] with p = sigmoid(logits), evaluated
// from the logits so extreme values stay finite. logits is k x 1.
Tensor binary_cross_entropy_logits(const Tensor& logits, const std::vector<double>& targets);

// Elementwise helpers used to assemble composite objectives.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Per-row inner product of two equally shaped matrices -> (n,1).
Tensor row_dot(const Tensor& a, const Tensor& b);

}  // namespace ops
}  // namespace edgedis
