#include "edgedis/ops.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace edgedis {
namespace ops {

namespace {

Tape& tape_of(const Tensor& t) {
  if (!t.valid()) throw ContractError("operation on an invalid tensor");
  return *t.tape();
}

Tape& same_tape(const Tensor& a, const Tensor& b) {
  Tape& ta = tape_of(a);
  if (b.tape() != &ta) throw ContractError("operands recorded on different tapes");
  return ta;
}

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + (x > 0.0 ? x : 0.0);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) + " * " +
                         shape_str(b));
  Tensor out = tape.alloc(a.value() * b.value(), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), ib = b.id(), io = out.id();
    tape.record([tp, ia, ib, io] {
      const Matrix& g = tp->grad_of(io);
      if (tp->requires_grad_of(ia)) tp->grad_of(ia).noalias() += g * tp->value_of(ib).transpose();
      if (tp->requires_grad_of(ib)) tp->grad_of(ib).noalias() += tp->value_of(ia).transpose() * g;
    });
  }
  return out;
}

Tensor linear_cols(const Tensor& h, const Tensor& w, int c0, int c1) {
  Tape& tape = same_tape(h, w);
  if (c0 < 0 || c1 > w.cols() || c0 >= c1)
    throw DimensionError("linear_cols: bad column range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + shape_str(w));
  if (h.cols() != c1 - c0)
    throw DimensionError("linear_cols: input width " + std::to_string(h.cols()) +
                         " != slice width " + std::to_string(c1 - c0));
  const int width = c1 - c0;
  Tensor out = tape.alloc(h.value() * w.value().middleCols(c0, width).transpose(),
                          h.requires_grad() || w.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ih = h.id(), iw = w.id(), io = out.id();
    tape.record([tp, ih, iw, io, c0, width] {
      const Matrix& g = tp->grad_of(io);
      if (tp->requires_grad_of(ih))
        tp->grad_of(ih).noalias() += g * tp->value_of(iw).middleCols(c0, width);
      if (tp->requires_grad_of(iw))
        tp->grad_of(iw).middleCols(c0, width).noalias() += g.transpose() * tp->value_of(ih);
    });
  }
  return out;
}

Tensor linear_cols(Tape& tape, const std::shared_ptr<const SparseRows>& hp, const Tensor& w,
                   int c0, int c1) {
  tape.check_owns(w);
  if (!hp) throw ContractError("linear_cols(sparse): null input view");
  const SparseRows& h = *hp;
  if (c0 < 0 || c1 > w.cols() || c0 >= c1)
    throw DimensionError("linear_cols(sparse): bad column range");
  if (h.cols != c1 - c0)
    throw DimensionError("linear_cols(sparse): input width " + std::to_string(h.cols) +
                         " != slice width " + std::to_string(c1 - c0));
  const int k = w.rows();
  Matrix value = Matrix::Zero(h.rows, k);
  const Matrix& wv = w.value();
  for (int i = 0; i < h.rows; ++i) {
    for (int p = h.row_ptr[static_cast<std::size_t>(i)];
         p < h.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
      value.row(i).noalias() +=
          h.val[static_cast<std::size_t>(p)] *
          wv.col(c0 + h.col[static_cast<std::size_t>(p)]).transpose();
    }
  }
  Tensor out = tape.alloc(std::move(value), w.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    std::shared_ptr<const SparseRows> hs = hp;
    const int iw = w.id(), io = out.id();
    tape.record([tp, hs, iw, io, c0] {
      const Matrix& g = tp->grad_of(io);
      Matrix& gw = tp->grad_of(iw);
      for (int i = 0; i < hs->rows; ++i) {
        for (int p = hs->row_ptr[static_cast<std::size_t>(i)];
             p < hs->row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
          gw.col(c0 + hs->col[static_cast<std::size_t>(p)]).noalias() +=
              hs->val[static_cast<std::size_t>(p)] * g.row(i).transpose();
        }
      }
    });
  }
  return out;
}

Tensor matmul_rows(const Tensor& a, const Tensor& w, int r0, int r1) {
  Tape& tape = same_tape(a, w);
  if (r0 < 0 || r1 > w.rows() || r0 >= r1)
    throw DimensionError("matmul_rows: bad row range");
  if (a.cols() != r1 - r0)
    throw DimensionError("matmul_rows: inner dimensions disagree, " + shape_str(a) +
                         " * rows[" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                         shape_str(w));
  const int height = r1 - r0;
  Tensor out = tape.alloc(a.value() * w.value().middleRows(r0, height),
                          a.requires_grad() || w.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), iw = w.id(), io = out.id();
    tape.record([tp, ia, iw, io, r0, height] {
      const Matrix& g = tp->grad_of(io);
      if (tp->requires_grad_of(ia))
        tp->grad_of(ia).noalias() += g * tp->value_of(iw).middleRows(r0, height).transpose();
      if (tp->requires_grad_of(iw))
        tp->grad_of(iw).middleRows(r0, height).noalias() += tp->value_of(ia).transpose() * g;
    });
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tape& tape = tape_of(x);
  if (!(slope > 0.0 && slope < 1.0))
    throw ConfigError("leaky_relu: slope must lie in (0,1)");
  Tensor out = tape.alloc(x.value().cwiseMax(x.value() * slope), x.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ix = x.id(), io = out.id();
    tape.record([tp, ix, io, slope] {
      const Matrix& g = tp->grad_of(io);
      const Matrix& v = tp->value_of(ix);
      tp->grad_of(ix).array() +=
          g.array() * v.unaryExpr([slope](double x) { return x >= 0.0 ? 1.0 : slope; }).array();
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tape& tape = tape_of(x);
  Matrix value = x.value().unaryExpr([](double v) { return stable_sigmoid(v); });
  Tensor out = tape.alloc(std::move(value), x.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ix = x.id(), io = out.id();
    tape.record([tp, ix, io] {
      const Matrix& g = tp->grad_of(io);
      const Matrix& s = tp->value_of(io);
      tp->grad_of(ix).array() += g.array() * s.array() * (1.0 - s.array());
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Tape& tape = tape_of(parts.front());
  const int n = parts.front().rows();
  int total = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != n)
      throw DimensionError("concat_cols: row counts disagree, " + std::to_string(n) + " vs " +
                           std::to_string(p.rows()));
    total += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Matrix value(n, total);
  int at = 0;
  for (const Tensor& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  Tensor out = tape.alloc(std::move(value), needs_grad);
  if (needs_grad) {
    Tape* tp = &tape;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (const Tensor& p : parts) ids.push_back(p.id());
    const int io = out.id();
    tape.record([tp, ids = std::move(ids), io] {
      const Matrix& g = tp->grad_of(io);
      int at = 0;
      for (int id : ids) {
        const int w = static_cast<int>(tp->value_of(id).cols());
        if (tp->requires_grad_of(id)) tp->grad_of(id).noalias() += g.middleCols(at, w);
        at += w;
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) { return concat_cols(std::vector<Tensor>{a, b}); }

Tensor edge_gather(const Tensor& h, const std::vector<int>& idx) {
  Tape& tape = tape_of(h);
  const int n = h.rows();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n)
      throw IndexError("edge_gather: index " + std::to_string(idx[i]) + " out of range [0," +
                       std::to_string(n) + ") at position " + std::to_string(i));
  }
  Matrix value(static_cast<int>(idx.size()), h.cols());
  const Matrix& hv = h.value();
  for (std::size_t i = 0; i < idx.size(); ++i) value.row(static_cast<int>(i)) = hv.row(idx[i]);
  Tensor out = tape.alloc(std::move(value), h.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ih = h.id(), io = out.id();
    tape.record([tp, ih, io, idx] {
      const Matrix& g = tp->grad_of(io);
      Matrix& gh = tp->grad_of(ih);
      for (std::size_t i = 0; i < idx.size(); ++i)
        gh.row(idx[i]) += g.row(static_cast<int>(i));
    });
  }
  return out;
}

namespace {

void check_segments(const std::vector<int>& seg, int rows, int num_segments, const char* who) {
  if (static_cast<int>(seg.size()) != rows)
    throw DimensionError(std::string(who) + ": segment list length " +
                         std::to_string(seg.size()) + " != row count " + std::to_string(rows));
  for (int s : seg) {
    if (s < 0 || s >= num_segments)
      throw IndexError(std::string(who) + ": segment id " + std::to_string(s) +
                       " out of range [0," + std::to_string(num_segments) + ")");
  }
}

}  // namespace

Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg, int num_segments) {
  Tape& tape = tape_of(scores);
  if (scores.cols() != 1) throw DimensionError("segment_softmax: scores must be (e x 1)");
  const int e = scores.rows();
  check_segments(seg, e, num_segments, "segment_softmax");

  const Matrix& x = scores.value();
  std::vector<double> gmax(static_cast<std::size_t>(num_segments),
                           -std::numeric_limits<double>::infinity());
  for (int i = 0; i < e; ++i) {
    const std::size_t s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
    if (x(i, 0) > gmax[s]) gmax[s] = x(i, 0);
  }
  std::vector<double> gsum(static_cast<std::size_t>(num_segments), 0.0);
  Matrix value(e, 1);
  for (int i = 0; i < e; ++i) {
    const std::size_t s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
    value(i, 0) = std::exp(x(i, 0) - gmax[s]);
    gsum[s] += value(i, 0);
  }
  for (int i = 0; i < e; ++i)
    value(i, 0) /= gsum[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])];

  Tensor out = tape.alloc(std::move(value), scores.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ix = scores.id(), io = out.id();
    tape.record([tp, ix, io, seg, num_segments] {
      const Matrix& g = tp->grad_of(io);
      const Matrix& w = tp->value_of(io);
      std::vector<double> dot(static_cast<std::size_t>(num_segments), 0.0);
      const int e = static_cast<int>(w.rows());
      for (int i = 0; i < e; ++i)
        dot[static_cast<std::size_t>(seg[static_cast<std::size_t>(i)])] += w(i, 0) * g(i, 0);
      Matrix& gx = tp->grad_of(ix);
      for (int i = 0; i < e; ++i) {
        const std::size_t s = static_cast<std::size_t>(seg[static_cast<std::size_t>(i)]);
        gx(i, 0) += w(i, 0) * (g(i, 0) - dot[s]);
      }
    });
  }
  return out;
}

Tensor segment_weighted_sum(const Tensor& weights, const Tensor& msgs,
                            const std::vector<int>& seg, int num_segments) {
  Tape& tape = same_tape(weights, msgs);
  if (weights.cols() != 1) throw DimensionError("segment_weighted_sum: weights must be (e x 1)");
  if (weights.rows() != msgs.rows())
    throw DimensionError("segment_weighted_sum: weights/messages row counts disagree");
  const int e = msgs.rows();
  check_segments(seg, e, num_segments, "segment_weighted_sum");

  Matrix value = Matrix::Zero(num_segments, msgs.cols());
  const Matrix& wv = weights.value();
  const Matrix& mv = msgs.value();
  for (int i = 0; i < e; ++i)
    value.row(seg[static_cast<std::size_t>(i)]).noalias() += wv(i, 0) * mv.row(i);

  Tensor out = tape.alloc(std::move(value), weights.requires_grad() || msgs.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int iw = weights.id(), im = msgs.id(), io = out.id();
    tape.record([tp, iw, im, io, seg] {
      const Matrix& g = tp->grad_of(io);
      const Matrix& wv = tp->value_of(iw);
      const Matrix& mv = tp->value_of(im);
      const int e = static_cast<int>(mv.rows());
      if (tp->requires_grad_of(iw)) {
        Matrix& gw = tp->grad_of(iw);
        for (int i = 0; i < e; ++i)
          gw(i, 0) += g.row(seg[static_cast<std::size_t>(i)]).dot(mv.row(i));
      }
      if (tp->requires_grad_of(im)) {
        Matrix& gm = tp->grad_of(im);
        for (int i = 0; i < e; ++i)
          gm.row(i).noalias() += wv(i, 0) * g.row(seg[static_cast<std::size_t>(i)]);
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             const std::vector<std::uint8_t>& mask) {
  Tape& tape = tape_of(logits);
  const int n = logits.rows();
  const int c = logits.cols();
  if (static_cast<int>(targets.size()) != n || static_cast<int>(mask.size()) != n)
    throw DimensionError("softmax_cross_entropy: targets/mask length != row count");
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++count;
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= c)
      throw IndexError("softmax_cross_entropy: target " + std::to_string(t) +
                       " out of range on masked row " + std::to_string(i));
  }
  if (count == 0) throw ContractError("softmax_cross_entropy: empty mask");

  const Matrix& x = logits.value();
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double m = x.row(i).maxCoeff();
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(x(i, j) - m);
    loss += m + std::log(sum) - x(i, targets[static_cast<std::size_t>(i)]);
  }
  loss /= count;

  Tensor out = tape.alloc(Matrix::Constant(1, 1, loss), logits.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ix = logits.id(), io = out.id();
    tape.record([tp, ix, io, targets, mask, count] {
      const double gs = tp->grad_of(io)(0, 0) / count;
      const Matrix& x = tp->value_of(ix);
      Matrix& gx = tp->grad_of(ix);
      const int n = static_cast<int>(x.rows());
      const int c = static_cast<int>(x.cols());
      for (int i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const double m = x.row(i).maxCoeff();
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(x(i, j) - m);
        for (int j = 0; j < c; ++j) {
          double p = std::exp(x(i, j) - m) / sum;
          if (j == targets[static_cast<std::size_t>(i)]) p -= 1.0;
          gx(i, j) += gs * p;
        }
      }
    });
  }
  return out;
}

Tensor binary_cross_entropy_logits(const Tensor& logits, const std::vector<double>& targets) {
  Tape& tape = tape_of(logits);
  if (logits.cols() != 1) throw DimensionError("binary_cross_entropy: logits must be (k x 1)");
  const int k = logits.rows();
  if (static_cast<int>(targets.size()) != k)
    throw DimensionError("binary_cross_entropy: target length " + std::to_string(targets.size()) +
                         " != logit count " + std::to_string(k));
  if (k == 0) throw ContractError("binary_cross_entropy: empty batch");

  const Matrix& x = logits.value();
  double loss = 0.0;
  for (int i = 0; i < k; ++i)
    loss += softplus(x(i, 0)) - targets[static_cast<std::size_t>(i)] * x(i, 0);
  loss /= k;

  Tensor out = tape.alloc(Matrix::Constant(1, 1, loss), logits.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ix = logits.id(), io = out.id();
    tape.record([tp, ix, io, targets, k] {
      const double gs = tp->grad_of(io)(0, 0) / k;
      const Matrix& x = tp->value_of(ix);
      Matrix& gx = tp->grad_of(ix);
      for (int i = 0; i < k; ++i)
        gx(i, 0) += gs * (stable_sigmoid(x(i, 0)) - targets[static_cast<std::size_t>(i)]);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("add: shapes disagree, " + shape_str(a) + " vs " + shape_str(b));
  Tensor out = tape.alloc(a.value() + b.value(), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), ib = b.id(), io = out.id();
    tape.record([tp, ia, ib, io] {
      const Matrix& g = tp->grad_of(io);
      if (tp->requires_grad_of(ia)) tp->grad_of(ia) += g;
      if (tp->requires_grad_of(ib)) tp->grad_of(ib) += g;
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("mul: shapes disagree, " + shape_str(a) + " vs " + shape_str(b));
  Tensor out = tape.alloc(a.value().cwiseProduct(b.value()),
                          a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), ib = b.id(), io = out.id();
    tape.record([tp, ia, ib, io] {
      const Matrix& g = tp->grad_of(io);
      if (tp->requires_grad_of(ia)) tp->grad_of(ia) += g.cwiseProduct(tp->value_of(ib));
      if (tp->requires_grad_of(ib)) tp->grad_of(ib) += g.cwiseProduct(tp->value_of(ia));
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tape& tape = tape_of(a);
  Tensor out = tape.alloc(a.value() * s, a.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), io = out.id();
    tape.record([tp, ia, io, s] { tp->grad_of(ia) += s * tp->grad_of(io); });
  }
  return out;
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("row_dot: shapes disagree, " + shape_str(a) + " vs " + shape_str(b));
  Matrix value = a.value().cwiseProduct(b.value()).rowwise().sum();
  Tensor out = tape.alloc(std::move(value), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    Tape* tp = &tape;
    const int ia = a.id(), ib = b.id(), io = out.id();
    tape.record([tp, ia, ib, io] {
      const Matrix& g = tp->grad_of(io);
      const Eigen::Map<const Eigen::ArrayXd> gs(g.data(), g.rows());
      if (tp->requires_grad_of(ia))
        tp->grad_of(ia).array() += tp->value_of(ib).array().colwise() * gs;
      if (tp->requires_grad_of(ib))
        tp->grad_of(ib).array() += tp->value_of(ia).array().colwise() * gs;
    });
  }
  return out;
}

}  // namespace ops
}  // namespace edgedis
