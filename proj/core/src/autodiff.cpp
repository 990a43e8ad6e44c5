#include "muse/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "muse/errors.hpp"

namespace muse {

Parameter::Parameter(DenseMatrix init)
    : value(std::move(init)),
      grad(value.rows(), value.cols()),
      adam_m(value.rows(), value.cols()),
      adam_v(value.rows(), value.cols()) {}

const DenseMatrix& Var::value() const { return tape_->value(id_); }
const DenseMatrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(OpKind kind, std::vector<std::size_t> inputs, DenseMatrix value, BackwardFn fn) {
  bool rg = false;
  for (std::size_t in : inputs) rg = rg || nodes_[in].requires_grad;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), {}, std::move(fn), nullptr, rg});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(DenseMatrix value) {
  nodes_.push_back(Node{OpKind::kConstant, {}, std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{OpKind::kParameter, {}, p.value, {}, {}, &p, true});
  return Var(this, nodes_.size() - 1);
}

DenseMatrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const DenseMatrix& g) {
  if (!nodes_[id].requires_grad) return;
  DenseMatrix& dst = grad_buffer(id);
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const std::size_t root = loss.id();
  const DenseMatrix& lv = nodes_[root].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  for (auto& n : nodes_) n.grad = DenseMatrix();
  nodes_[root].grad = DenseMatrix(1, 1, 1.0);
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      auto d = n.param->grad.data();
      auto s = n.grad.data();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

namespace ad {

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw std::invalid_argument("operation on an unbound Var");
  return *v.tape();
}

void same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("operands live on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  DenseMatrix out = muse::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(OpKind::kMatmul, {ia, ib}, std::move(out), [ia, ib](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, matmul_nt(g, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, matmul_tn(tp.value(ia), g));
  });
}

Var dense_apply(const DenseMatrix& m, Var x) {
  Tape& t = tape_of(x);
  DenseMatrix out = muse::matmul(m, x.value());
  const std::size_t ix = x.id();
  const DenseMatrix* mp = &m;
  return t.push(OpKind::kDenseApply, {ix}, std::move(out), [ix, mp](Tape& tp, std::size_t self) {
    tp.accumulate(ix, matmul_tn(*mp, tp.grad(self)));
  });
}

Var spmm(const SparseMatrix& s, Var x) {
  Tape& t = tape_of(x);
  DenseMatrix out = muse::spmm(s, x.value());
  const std::size_t ix = x.id();
  const SparseMatrix* sp = &s;
  return t.push(OpKind::kSpmm, {ix}, std::move(out), [ix, sp](Tape& tp, std::size_t self) {
    tp.accumulate(ix, spmm_tn(*sp, tp.grad(self)));
  });
}

Var elementwise(Activation kind, Var x) {
  Tape& t = tape_of(x);
  const std::size_t ix = x.id();
  DenseMatrix out = x.value();
  switch (kind) {
    case Activation::kIdentity:
      return t.push(OpKind::kIdentity, {ix}, std::move(out), [ix](Tape& tp, std::size_t self) {
        tp.accumulate(ix, tp.grad(self));
      });
    case Activation::kRelu:
      for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
      return t.push(OpKind::kRelu, {ix}, std::move(out), [ix](Tape& tp, std::size_t self) {
        DenseMatrix g = tp.grad(self);
        const auto in = tp.value(ix).data();
        auto gd = g.data();
        for (std::size_t k = 0; k < gd.size(); ++k) {
          if (!(in[k] > 0.0)) gd[k] = 0.0;
        }
        tp.accumulate(ix, g);
      });
    case Activation::kSigmoid:
      for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
      return t.push(OpKind::kSigmoid, {ix}, std::move(out), [ix](Tape& tp, std::size_t self) {
        DenseMatrix g = tp.grad(self);
        const auto s = tp.value(self).data();
        auto gd = g.data();
        for (std::size_t k = 0; k < gd.size(); ++k) gd[k] *= s[k] * (1.0 - s[k]);
        tp.accumulate(ix, g);
      });
  }
  throw std::invalid_argument("elementwise: unknown activation");
}

Var row_softmax(Var x) {
  Tape& t = tape_of(x);
  const std::size_t ix = x.id();
  return t.push(OpKind::kRowSoftmax, {ix}, muse::row_softmax(x.value()),
                [ix](Tape& tp, std::size_t self) {
                  const DenseMatrix& s = tp.value(self);
                  DenseMatrix g = tp.grad(self);
                  for (std::size_t i = 0; i < s.rows(); ++i) {
                    const auto sr = s.row(i);
                    auto gr = g.row(i);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < sr.size(); ++j) dot += gr[j] * sr[j];
                    for (std::size_t j = 0; j < sr.size(); ++j) gr[j] = sr[j] * (gr[j] - dot);
                  }
                  tp.accumulate(ix, g);
                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts[0].value().shape_string() +
                           " vs " + p.value().shape_string());
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const DenseMatrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    }
    off += v.cols();
  }
  std::vector<std::size_t> inputs = ids;
  return t.push(OpKind::kConcatCols, std::move(inputs), std::move(out),
                [ids, widths](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad(self);
                  std::size_t off = 0;
                  for (std::size_t p = 0; p < ids.size(); ++p) {
                    if (tp.requires_grad(ids[p])) {
                      DenseMatrix slice(g.rows(), widths[p]);
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                        const auto gr = g.row(i);
                        std::copy(gr.begin() + off, gr.begin() + off + widths[p],
                                  slice.row(i).begin());
                      }
                      tp.accumulate(ids[p], slice);
                    }
                    off += widths[p];
                  }
                });
}

Var dropout(Var x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  Tape& t = tape_of(x);
  const std::size_t ix = x.id();
  const double keep_scale = 1.0 / (1.0 - p);
  DenseMatrix mask(x.rows(), x.cols());
  DenseMatrix out = x.value();
  auto md = mask.data();
  auto od = out.data();
  for (std::size_t k = 0; k < md.size(); ++k) {
    md[k] = rng.uniform() < p ? 0.0 : keep_scale;
    od[k] *= md[k];
  }
  return t.push(OpKind::kDropout, {ix}, std::move(out),
                [ix, mask = std::move(mask)](Tape& tp, std::size_t self) {
                  DenseMatrix g = tp.grad(self);
                  auto gd = g.data();
                  const auto m = mask.data();
                  for (std::size_t k = 0; k < gd.size(); ++k) gd[k] *= m[k];
                  tp.accumulate(ix, g);
                });
}

namespace {

Var binary(Var a, Var b, double sign, OpKind kind) {
  same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("elementwise binary op: shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string());
  }
  Tape& t = tape_of(a);
  DenseMatrix out = a.value();
  auto od = out.data();
  const auto bd = b.value().data();
  for (std::size_t k = 0; k < od.size(); ++k) od[k] += sign * bd[k];
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(kind, {ia, ib}, std::move(out), [ia, ib, sign](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    if (tp.requires_grad(ib)) {
      DenseMatrix g = tp.grad(self);
      for (double& v : g.data()) v *= sign;
      tp.accumulate(ib, g);
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, 1.0, OpKind::kAdd); }
Var sub(Var a, Var b) { return binary(a, b, -1.0, OpKind::kSub); }

Var scale(Var x, double c) {
  Tape& t = tape_of(x);
  DenseMatrix out = x.value();
  for (double& v : out.data()) v *= c;
  const std::size_t ix = x.id();
  return t.push(OpKind::kScale, {ix}, std::move(out), [ix, c](Tape& tp, std::size_t self) {
    DenseMatrix g = tp.grad(self);
    for (double& v : g.data()) v *= c;
    tp.accumulate(ix, g);
  });
}

Var add_row_broadcast(Var x, Var bias) {
  same_tape(x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_row_broadcast: bias " + bias.value().shape_string() +
                         " does not match " + x.value().shape_string());
  }
  Tape& t = tape_of(x);
  DenseMatrix out = x.value();
  const auto b = bias.value().row(0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  const std::size_t ix = x.id(), ibias = bias.id();
  return t.push(OpKind::kAddRowBroadcast, {ix, ibias}, std::move(out),
                [ix, ibias](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad(self);
                  tp.accumulate(ix, g);
                  if (tp.requires_grad(ibias)) {
                    DenseMatrix gb(1, g.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      const auto gr = g.row(i);
                      for (std::size_t j = 0; j < gr.size(); ++j) gb(0, j) += gr[j];
                    }
                    tp.accumulate(ibias, gb);
                  }
                });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& t = tape_of(x);
  const DenseMatrix& v = x.value();
  DenseMatrix out(rows.size(), v.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= v.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy(v.row(rows[r]).begin(), v.row(rows[r]).end(), out.row(r).begin());
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.push(OpKind::kGatherRows, {ix}, std::move(out),
                [ix, idx = std::move(idx)](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(ix)) return;
                  const DenseMatrix& g = tp.grad(self);
                  DenseMatrix& dst = tp.grad_buffer(ix);
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    auto d = dst.row(idx[r]);
                    const auto s = g.row(r);
                    for (std::size_t j = 0; j < s.size(); ++j) d[j] += s[j];
                  }
                });
}

Var row_l2_norm(Var x) {
  Tape& t = tape_of(x);
  const DenseMatrix& v = x.value();
  DenseMatrix out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double s = 0.0;
    for (double e : v.row(i)) s += e * e;
    out(i, 0) = std::sqrt(s);
  }
  const std::size_t ix = x.id();
  return t.push(OpKind::kRowL2Norm, {ix}, std::move(out), [ix](Tape& tp, std::size_t self) {
    const DenseMatrix& in = tp.value(ix);
    const DenseMatrix& n = tp.value(self);
    const DenseMatrix& g = tp.grad(self);
    DenseMatrix gx(in.rows(), in.cols());
    for (std::size_t i = 0; i < in.rows(); ++i) {
      if (n(i, 0) == 0.0) continue;
      const double f = g(i, 0) / n(i, 0);
      const auto r = in.row(i);
      auto o = gx.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) o[j] = f * r[j];
    }
    tp.accumulate(ix, gx);
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  return t.push(OpKind::kSum, {ix}, DenseMatrix(1, 1, s), [ix](Tape& tp, std::size_t self) {
    const DenseMatrix& in = tp.value(ix);
    tp.accumulate(ix, DenseMatrix(in.rows(), in.cols(), tp.grad(self)(0, 0)));
  });
}

Var nll_mean(Var probs, std::span<const int> labels) {
  constexpr double kFloor = 1e-12;
  Tape& t = tape_of(probs);
  const DenseMatrix& p = probs.value();
  if (labels.size() != p.rows()) {
    throw DimensionError("nll_mean: " + std::to_string(labels.size()) + " labels for " +
                         p.shape_string() + " probabilities");
  }
  const std::size_t n = p.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= p.cols()) throw DimensionError("nll_mean: label out of range");
    total += std::log(std::max(p(i, y), kFloor));
  }
  const double value = n == 0 ? 0.0 : -total / static_cast<double>(n);
  const std::size_t ip = probs.id();
  std::vector<int> ys(labels.begin(), labels.end());
  return t.push(OpKind::kNllMean, {ip}, DenseMatrix(1, 1, value),
                [ip, ys = std::move(ys)](Tape& tp, std::size_t self) {
                  const DenseMatrix& p = tp.value(ip);
                  const double g = tp.grad(self)(0, 0);
                  DenseMatrix gp(p.rows(), p.cols());
                  const double inv_n = 1.0 / static_cast<double>(ys.size());
                  for (std::size_t i = 0; i < ys.size(); ++i) {
                    const auto y = static_cast<std::size_t>(ys[i]);
                    const double pi = p(i, y);
                    if (pi >= kFloor) gp(i, y) = -g * inv_n / pi;
                  }
                  tp.accumulate(ip, gp);
                });
}

Var kl_to_softmax(const DenseMatrix& p, Var logits) {
  Tape& t = tape_of(logits);
  const DenseMatrix& z = logits.value();
  if (!p.same_shape(z)) {
    throw DimensionError("kl_to_softmax: p " + p.shape_string() + " vs logits " +
                         z.shape_string());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto zr = z.row(i);
    const auto pr = p.row(i);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double se = 0.0;
    for (double v : zr) se += std::exp(v - mx);
    const double lse = mx + std::log(se);
    for (std::size_t k = 0; k < zr.size(); ++k) {
      if (pr[k] > 0.0) total += pr[k] * (std::log(pr[k]) - (zr[k] - lse));
    }
  }
  const std::size_t iz = logits.id();
  DenseMatrix pc = p;
  return t.push(OpKind::kKlToSoftmax, {iz}, DenseMatrix(1, 1, total),
                [iz, pc = std::move(pc)](Tape& tp, std::size_t self) {
                  const double g = tp.grad(self)(0, 0);
                  DenseMatrix q = muse::row_softmax(tp.value(iz));
                  for (std::size_t i = 0; i < q.rows(); ++i) {
                    const auto pr = pc.row(i);
                    double mass = 0.0;
                    for (double v : pr) mass += v;
                    auto qr = q.row(i);
                    for (std::size_t k = 0; k < qr.size(); ++k) qr[k] = g * (mass * qr[k] - pr[k]);
                  }
                  tp.accumulate(iz, q);
                });
}

}  // namespace ad

void adam_step(std::span<Parameter* const> params, const AdamOptions& opts) {
  for (Parameter* p : params) {
    ++p->step_count;
    const double t = static_cast<double>(p->step_count);
    const double bc1 = 1.0 - std::pow(opts.beta1, t);
    const double bc2 = 1.0 - std::pow(opts.beta2, t);
    auto v = p->value.data();
    const auto g = p->grad.data();
    auto m1 = p->adam_m.data();
    auto m2 = p->adam_v.data();
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (opts.weight_decay != 0.0) v[k] -= opts.lr * opts.weight_decay * v[k];
      m1[k] = opts.beta1 * m1[k] + (1.0 - opts.beta1) * g[k];
      m2[k] = opts.beta2 * m2[k] + (1.0 - opts.beta2) * g[k] * g[k];
      const double mhat = m1[k] / bc1;
      const double vhat = m2[k] / bc2;
      v[k] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

double finite_diff_check(const LossBuilder& build, Parameter& p, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_check: eps must be positive");
  const DenseMatrix saved_grad = p.grad;
  p.zero_grad();
  DenseMatrix analytic;
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
    analytic = p.grad;
  }
  auto eval = [&] {
    Tape tape;
    return build(tape).value()(0, 0);
  };
  double worst = 0.0;
  auto x = p.value.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + eps;
    const double fp = eval();
    x[k] = orig - eps;
    const double fm = eval();
    x[k] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic.data()[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  p.grad = saved_grad;
  return worst;
}

}  // namespace muse
