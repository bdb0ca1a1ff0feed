// src/autograd.cc

// Copyright 2026  mtcascade authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mtcascade/autograd.h"

#include <cmath>

namespace mtcascade {

namespace {

void RequireSameShape(const Matrix &a, const Matrix &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError(std::string(op) + ": shape mismatch " + ShapeString(a) +
                    " vs " + ShapeString(b));
}

}  // namespace

const Matrix &Var::value() const { return tape_->Value(id_); }

Var Tape::Push(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

void Tape::CheckOwned(Var v) const {
  if (v.tape_ != this || v.id_ < 0 ||
      static_cast<size_t>(v.id_) >= nodes_.size())
    throw Error("Var used with a tape that does not own it");
}

Matrix &Tape::Grad(int32_t id) {
  Node &n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() > 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  else if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::Constant(Matrix value) { return Push(std::move(value), false); }

Var Tape::Param(const Parameter &p, bool trainable) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Var v = Push(p.value, trainable);
  nodes_[v.id_].param = &p;
  param_nodes_[&p] = v.id_;
  return v;
}

Var Tape::MatMul(Var a, Var b) {
  CheckOwned(a);
  CheckOwned(b);
  const Matrix &av = a.value(), &bv = b.value();
  if (av.cols() != bv.rows())
    throw DataError("MatMul: shape mismatch " + ShapeString(av) + " * " +
                    ShapeString(bv));
  Var out = Push(av * bv, NeedsGrad(a) || NeedsGrad(b));
  if (nodes_[out.id_].needs_grad) {
    int32_t ia = a.id_, ib = b.id_, io = out.id_;
    nodes_[io].backward = [this, ia, ib, io] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ia].needs_grad) Grad(ia).noalias() += g * Value(ib).transpose();
      if (nodes_[ib].needs_grad) Grad(ib).noalias() += Value(ia).transpose() * g;
    };
  }
  return out;
}

Var Tape::MatMulNT(Var a, Var b) {
  CheckOwned(a);
  CheckOwned(b);
  const Matrix &av = a.value(), &bv = b.value();
  if (av.cols() != bv.cols())
    throw DataError("MatMulNT: shape mismatch " + ShapeString(av) + " * " +
                    ShapeString(bv) + "^T");
  Var out = Push(av * bv.transpose(), NeedsGrad(a) || NeedsGrad(b));
  if (nodes_[out.id_].needs_grad) {
    int32_t ia = a.id_, ib = b.id_, io = out.id_;
    nodes_[io].backward = [this, ia, ib, io] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ia].needs_grad) Grad(ia).noalias() += g * Value(ib);
      if (nodes_[ib].needs_grad)
        Grad(ib).noalias() += g.transpose() * Value(ia);
    };
  }
  return out;
}

Var Tape::Add(Var a, Var b) {
  CheckOwned(a);
  CheckOwned(b);
  RequireSameShape(a.value(), b.value(), "Add");
  Var out = Push(a.value() + b.value(), NeedsGrad(a) || NeedsGrad(b));
  if (nodes_[out.id_].needs_grad) {
    int32_t ia = a.id_, ib = b.id_, io = out.id_;
    nodes_[io].backward = [this, ia, ib, io] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ia].needs_grad) Grad(ia) += g;
      if (nodes_[ib].needs_grad) Grad(ib) += g;
    };
  }
  return out;
}

Var Tape::AddBias(Var x, Var bias) {
  CheckOwned(x);
  CheckOwned(bias);
  const Matrix &xv = x.value(), &bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    throw DataError("AddBias: shape mismatch " + ShapeString(xv) + " + " +
                    ShapeString(bv));
  Matrix y = xv;
  y.rowwise() += bv.row(0);
  Var out = Push(std::move(y), NeedsGrad(x) || NeedsGrad(bias));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, ib = bias.id_, io = out.id_;
    nodes_[io].backward = [this, ix, ib, io] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ix].needs_grad) Grad(ix) += g;
      if (nodes_[ib].needs_grad) Grad(ib) += g.colwise().sum();
    };
  }
  return out;
}

Var Tape::Scale(Var a, Real s) {
  CheckOwned(a);
  Var out = Push(a.value() * s, NeedsGrad(a));
  if (nodes_[out.id_].needs_grad) {
    int32_t ia = a.id_, io = out.id_;
    nodes_[io].backward = [this, ia, io, s] { Grad(ia) += nodes_[io].grad * s; };
  }
  return out;
}

Var Tape::Mul(Var a, Var b) {
  CheckOwned(a);
  CheckOwned(b);
  RequireSameShape(a.value(), b.value(), "Mul");
  Var out = Push(a.value().cwiseProduct(b.value()), NeedsGrad(a) || NeedsGrad(b));
  if (nodes_[out.id_].needs_grad) {
    int32_t ia = a.id_, ib = b.id_, io = out.id_;
    nodes_[io].backward = [this, ia, ib, io] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ia].needs_grad) Grad(ia) += g.cwiseProduct(Value(ib));
      if (nodes_[ib].needs_grad) Grad(ib) += g.cwiseProduct(Value(ia));
    };
  }
  return out;
}

Var Tape::Sigmoid(Var x) {
  CheckOwned(x);
  Matrix y = x.value().unaryExpr(
      [](Real v) { return Real(1) / (Real(1) + std::exp(-v)); });
  Var out = Push(std::move(y), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      const Matrix &y = Value(io);
      Grad(ix).array() +=
          nodes_[io].grad.array() * y.array() * (Real(1) - y.array());
    };
  }
  return out;
}

Var Tape::Tanh(Var x) {
  CheckOwned(x);
  Var out = Push(x.value().array().tanh().matrix(), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      const Matrix &y = Value(io);
      Grad(ix).array() +=
          nodes_[io].grad.array() * (Real(1) - y.array().square());
    };
  }
  return out;
}

Var Tape::Relu(Var x) {
  CheckOwned(x);
  Var out = Push(x.value().cwiseMax(Real(0)), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      Grad(ix).array() += (Value(ix).array() > Real(0))
                              .select(nodes_[io].grad.array(), Real(0));
    };
  }
  return out;
}

Var Tape::Swish(Var x) {
  CheckOwned(x);
  Matrix y = x.value().unaryExpr(
      [](Real v) { return v / (Real(1) + std::exp(-v)); });
  Var out = Push(std::move(y), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      Matrix d = Value(ix).unaryExpr([](Real v) {
        Real s = Real(1) / (Real(1) + std::exp(-v));
        return s + v * s * (Real(1) - s);
      });
      Grad(ix).array() += nodes_[io].grad.array() * d.array();
    };
  }
  return out;
}

Var Tape::LayerNorm(Var x, Var gamma, Var beta, Real eps) {
  CheckOwned(x);
  CheckOwned(gamma);
  CheckOwned(beta);
  const Matrix &xv = x.value();
  const Eigen::Index n = xv.rows(), d = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 ||
      beta.cols() != d)
    throw DataError("LayerNorm: parameter shape mismatch for input " +
                    ShapeString(xv));
  Matrix xhat(n, d);
  std::vector<Real> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Real mean = xv.row(r).mean();
    Real var = (xv.row(r).array() - mean).square().mean();
    inv_std[r] = Real(1) / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std[r];
  }
  Matrix y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  bool ng = NeedsGrad(x) || NeedsGrad(gamma) || NeedsGrad(beta);
  Var out = Push(std::move(y), ng);
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, ig = gamma.id_, ib = beta.id_, io = out.id_;
    nodes_[io].backward = [this, ix, ig, ib, io, xhat = std::move(xhat),
                           inv_std = std::move(inv_std)] {
      const Matrix &g = nodes_[io].grad;
      if (nodes_[ig].needs_grad)
        Grad(ig) += g.cwiseProduct(xhat).colwise().sum();
      if (nodes_[ib].needs_grad) Grad(ib) += g.colwise().sum();
      if (nodes_[ix].needs_grad) {
        Matrix gxhat = g.array().rowwise() * Value(ig).row(0).array();
        Matrix &gx = Grad(ix);
        for (Eigen::Index r = 0; r < gxhat.rows(); ++r) {
          Real m1 = gxhat.row(r).mean();
          Real m2 = gxhat.row(r).cwiseProduct(xhat.row(r)).mean();
          gx.row(r).array() +=
              inv_std[r] *
              (gxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
      }
    };
  }
  return out;
}

Var Tape::Softmax(Var x) {
  CheckOwned(x);
  const Matrix &xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    Real mx = xv.row(r).maxCoeff();
    y.row(r) = (xv.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  Var out = Push(std::move(y), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      const Matrix &y = Value(io);
      const Matrix &g = nodes_[io].grad;
      Matrix &gx = Grad(ix);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        Real dot = g.row(r).dot(y.row(r));
        gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
      }
    };
  }
  return out;
}

Var Tape::LogSoftmax(Var x) {
  CheckOwned(x);
  const Matrix &xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    Real mx = xv.row(r).maxCoeff();
    Real lse = mx + std::log((xv.row(r).array() - mx).exp().sum());
    y.row(r) = xv.row(r).array() - lse;
  }
  Var out = Push(std::move(y), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      const Matrix &y = Value(io);
      const Matrix &g = nodes_[io].grad;
      Matrix &gx = Grad(ix);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        Real s = g.row(r).sum();
        gx.row(r).array() += g.row(r).array() - y.row(r).array().exp() * s;
      }
    };
  }
  return out;
}

Var Tape::Transpose(Var x) {
  CheckOwned(x);
  Var out = Push(x.value().transpose(), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io] {
      Grad(ix) += nodes_[io].grad.transpose();
    };
  }
  return out;
}

Var Tape::SliceCols(Var x, Eigen::Index start, Eigen::Index n) {
  CheckOwned(x);
  if (start < 0 || n < 0 || start + n > x.cols())
    throw DataError("SliceCols: range out of bounds for " +
                    ShapeString(x.value()));
  Var out = Push(x.value().middleCols(start, n), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io, start, n] {
      Grad(ix).middleCols(start, n) += nodes_[io].grad;
    };
  }
  return out;
}

Var Tape::SliceRows(Var x, Eigen::Index start, Eigen::Index n) {
  CheckOwned(x);
  if (start < 0 || n < 0 || start + n > x.rows())
    throw DataError("SliceRows: range out of bounds for " +
                    ShapeString(x.value()));
  Var out = Push(x.value().middleRows(start, n), NeedsGrad(x));
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, io = out.id_;
    nodes_[io].backward = [this, ix, io, start, n] {
      Grad(ix).middleRows(start, n) += nodes_[io].grad;
    };
  }
  return out;
}

Var Tape::ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw DataError("ConcatCols: no inputs");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  bool ng = false;
  for (const Var &p : parts) {
    CheckOwned(p);
    if (p.rows() != rows)
      throw DataError("ConcatCols: row mismatch " + ShapeString(p.value()));
    cols += p.cols();
    ng = ng || NeedsGrad(p);
  }
  Matrix y(rows, cols);
  std::vector<int32_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var &p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id_);
    offsets.push_back(off);
    off += p.cols();
  }
  Var out = Push(std::move(y), ng);
  if (nodes_[out.id_].needs_grad) {
    int32_t io = out.id_;
    nodes_[io].backward = [this, io, ids = std::move(ids),
                           offsets = std::move(offsets)] {
      const Matrix &g = nodes_[io].grad;
      for (size_t k = 0; k < ids.size(); ++k) {
        if (!nodes_[ids[k]].needs_grad) continue;
        Grad(ids[k]) += g.middleCols(offsets[k], Value(ids[k]).cols());
      }
    };
  }
  return out;
}

Var Tape::GatherRows(Var table, std::span<const int32_t> ids) {
  CheckOwned(table);
  const Matrix &tv = table.value();
  Matrix y(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows())
      throw DataError("GatherRows: id " + std::to_string(ids[i]) +
                      " out of range for table " + ShapeString(tv));
    y.row(i) = tv.row(ids[i]);
  }
  Var out = Push(std::move(y), NeedsGrad(table));
  if (nodes_[out.id_].needs_grad) {
    int32_t it = table.id_, io = out.id_;
    std::vector<int32_t> idv(ids.begin(), ids.end());
    nodes_[io].backward = [this, it, io, idv = std::move(idv)] {
      const Matrix &g = nodes_[io].grad;
      Matrix &gt = Grad(it);
      for (size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += g.row(i);
    };
  }
  return out;
}

Var Tape::DepthwiseConv1d(Var x, Var kernel, Var bias) {
  CheckOwned(x);
  CheckOwned(kernel);
  CheckOwned(bias);
  const Matrix &xv = x.value(), &kv = kernel.value(), &bv = bias.value();
  const Eigen::Index t_len = xv.rows(), d = xv.cols(), k_len = kv.rows();
  if (kv.cols() != d || k_len % 2 == 0 || bv.rows() != 1 || bv.cols() != d)
    throw DataError("DepthwiseConv1d: bad shapes x=" + ShapeString(xv) +
                    " kernel=" + ShapeString(kv) + " bias=" + ShapeString(bv));
  const Eigen::Index pad = (k_len - 1) / 2;
  Matrix y(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    y.row(t) = bv.row(0);
    for (Eigen::Index k = 0; k < k_len; ++k) {
      Eigen::Index s = t + k - pad;
      if (s < 0 || s >= t_len) continue;
      y.row(t).array() += kv.row(k).array() * xv.row(s).array();
    }
  }
  bool ng = NeedsGrad(x) || NeedsGrad(kernel) || NeedsGrad(bias);
  Var out = Push(std::move(y), ng);
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, ik = kernel.id_, ib = bias.id_, io = out.id_;
    nodes_[io].backward = [this, ix, ik, ib, io, pad] {
      const Matrix &g = nodes_[io].grad;
      const Matrix &xv = Value(ix), &kv = Value(ik);
      const Eigen::Index t_len = xv.rows(), k_len = kv.rows();
      bool gx_on = nodes_[ix].needs_grad, gk_on = nodes_[ik].needs_grad;
      Matrix *gx = gx_on ? &Grad(ix) : nullptr;
      Matrix *gk = gk_on ? &Grad(ik) : nullptr;
      for (Eigen::Index t = 0; t < t_len; ++t) {
        for (Eigen::Index k = 0; k < k_len; ++k) {
          Eigen::Index s = t + k - pad;
          if (s < 0 || s >= t_len) continue;
          if (gx_on) gx->row(s).array() += g.row(t).array() * kv.row(k).array();
          if (gk_on) gk->row(k).array() += g.row(t).array() * xv.row(s).array();
        }
      }
      if (nodes_[ib].needs_grad) Grad(ib) += g.colwise().sum();
    };
  }
  return out;
}

Var Tape::PairwiseSum(Var enc, Var pred) {
  CheckOwned(enc);
  CheckOwned(pred);
  const Matrix &ev = enc.value(), &pv = pred.value();
  if (ev.cols() != pv.cols())
    throw DataError("PairwiseSum: width mismatch " + ShapeString(ev) + " vs " +
                    ShapeString(pv));
  const Eigen::Index t_len = ev.rows(), u1 = pv.rows();
  Matrix y(t_len * u1, ev.cols());
  for (Eigen::Index t = 0; t < t_len; ++t)
    for (Eigen::Index u = 0; u < u1; ++u) y.row(t * u1 + u) = ev.row(t) + pv.row(u);
  Var out = Push(std::move(y), NeedsGrad(enc) || NeedsGrad(pred));
  if (nodes_[out.id_].needs_grad) {
    int32_t ie = enc.id_, ip = pred.id_, io = out.id_;
    nodes_[io].backward = [this, ie, ip, io, t_len, u1] {
      const Matrix &g = nodes_[io].grad;
      bool ge = nodes_[ie].needs_grad, gp = nodes_[ip].needs_grad;
      Matrix *genc = ge ? &Grad(ie) : nullptr;
      Matrix *gpred = gp ? &Grad(ip) : nullptr;
      for (Eigen::Index t = 0; t < t_len; ++t) {
        auto block = g.middleRows(t * u1, u1);
        if (ge) genc->row(t) += block.colwise().sum();
        if (gp) *gpred += block;
      }
    };
  }
  return out;
}

Var Tape::Lstm(Var x, Var wx, Var wh, Var b, bool reverse) {
  CheckOwned(x);
  CheckOwned(wx);
  CheckOwned(wh);
  CheckOwned(b);
  const Matrix &xv = x.value();
  const Eigen::Index steps = xv.rows(), hidden = wh.rows();
  if (wx.rows() != xv.cols() || wx.cols() != 4 * hidden ||
      wh.cols() != 4 * hidden || b.rows() != 1 || b.cols() != 4 * hidden)
    throw DataError("Lstm: bad shapes x=" + ShapeString(xv) +
                    " wx=" + ShapeString(wx.value()) +
                    " wh=" + ShapeString(wh.value()));
  const Matrix &whv = wh.value();
  Matrix pre = xv * wx.value();
  pre.rowwise() += b.value().row(0);
  // Post-activation gates, cell states and hidden states per row.
  Matrix gates(steps, 4 * hidden), cells(steps, hidden), hs(steps, hidden);
  RowVector h = RowVector::Zero(hidden), c = RowVector::Zero(hidden);
  auto sigm = [](Real v) { return Real(1) / (Real(1) + std::exp(-v)); };
  for (Eigen::Index k = 0; k < steps; ++k) {
    Eigen::Index s = reverse ? steps - 1 - k : k;
    RowVector z = pre.row(s) + h * whv;
    RowVector i = z.segment(0, hidden).unaryExpr(sigm);
    RowVector f = z.segment(hidden, hidden).unaryExpr(sigm);
    RowVector g = z.segment(2 * hidden, hidden).array().tanh().matrix();
    RowVector o = z.segment(3 * hidden, hidden).unaryExpr(sigm);
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    gates.row(s) << i, f, g, o;
    cells.row(s) = c;
    hs.row(s) = h;
  }
  bool ng = NeedsGrad(x) || NeedsGrad(wx) || NeedsGrad(wh) || NeedsGrad(b);
  Var out = Push(hs, ng);
  if (nodes_[out.id_].needs_grad) {
    int32_t ix = x.id_, iwx = wx.id_, iwh = wh.id_, ib = b.id_, io = out.id_;
    nodes_[io].backward = [this, ix, iwx, iwh, ib, io, reverse, steps, hidden,
                           gates = std::move(gates), cells = std::move(cells),
                           hs = std::move(hs)] {
      const Matrix &gy = nodes_[io].grad;
      const Matrix &whv = Value(iwh);
      Matrix dz(steps, 4 * hidden);
      RowVector dh_next = RowVector::Zero(hidden);
      RowVector dc_next = RowVector::Zero(hidden);
      Matrix gwh = Matrix::Zero(hidden, 4 * hidden);
      for (Eigen::Index k = steps - 1; k >= 0; --k) {
        Eigen::Index s = reverse ? steps - 1 - k : k;
        Eigen::Index prev = reverse ? s + 1 : s - 1;
        bool has_prev = k > 0;
        RowVector c_prev =
            has_prev ? RowVector(cells.row(prev)) : RowVector::Zero(hidden);
        RowVector h_prev =
            has_prev ? RowVector(hs.row(prev)) : RowVector::Zero(hidden);
        auto i = gates.row(s).segment(0, hidden).array();
        auto f = gates.row(s).segment(hidden, hidden).array();
        auto g = gates.row(s).segment(2 * hidden, hidden).array();
        auto o = gates.row(s).segment(3 * hidden, hidden).array();
        Eigen::Array<Real, 1, Eigen::Dynamic> tc = cells.row(s).array().tanh();
        Eigen::Array<Real, 1, Eigen::Dynamic> dh =
            gy.row(s).array() + dh_next.array();
        Eigen::Array<Real, 1, Eigen::Dynamic> dc =
            dh * o * (Real(1) - tc.square()) + dc_next.array();
        dz.row(s).segment(0, hidden) = (dc * g * i * (Real(1) - i)).matrix();
        dz.row(s).segment(hidden, hidden) =
            (dc * c_prev.array() * f * (Real(1) - f)).matrix();
        dz.row(s).segment(2 * hidden, hidden) =
            (dc * i * (Real(1) - g.square())).matrix();
        dz.row(s).segment(3 * hidden, hidden) =
            (dh * tc * o * (Real(1) - o)).matrix();
        dc_next = (dc * f).matrix();
        dh_next = dz.row(s) * whv.transpose();
        if (has_prev) gwh.noalias() += h_prev.transpose() * dz.row(s);
      }
      if (nodes_[ix].needs_grad)
        Grad(ix).noalias() += dz * Value(iwx).transpose();
      if (nodes_[iwx].needs_grad)
        Grad(iwx).noalias() += Value(ix).transpose() * dz;
      if (nodes_[iwh].needs_grad) Grad(iwh) += gwh;
      if (nodes_[ib].needs_grad) Grad(ib) += dz.colwise().sum();
    };
  }
  return out;
}

void Tape::Backward(std::span<const std::pair<Var, Matrix>> seeds) {
  if (!record_) throw Error("Backward on a non-recording tape");
  for (auto &n : nodes_) n.grad.resize(0, 0);
  int32_t last = -1;
  for (const auto &[v, seed] : seeds) {
    CheckOwned(v);
    RequireSameShape(v.value(), seed, "Backward seed");
    if (!nodes_[v.id_].needs_grad) continue;
    Grad(v.id_) += seed;
    last = std::max(last, v.id_);
  }
  for (int32_t i = last; i >= 0; --i) {
    Node &n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward();
  }
}

void Tape::Backward(Var out, Matrix seed) {
  std::pair<Var, Matrix> s{out, std::move(seed)};
  Backward(std::span<const std::pair<Var, Matrix>>(&s, 1));
}

Matrix Tape::GradOf(Var v) const {
  CheckOwned(v);
  const Node &n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::AccumulateParamGrads(GradientBuffer *buffer) const {
  for (const auto &[param, id] : param_nodes_) {
    const Node &n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0 || !buffer->Owns(*param)) continue;
    buffer->For(*param) += n.grad;
  }
}

}  // namespace mtcascade
