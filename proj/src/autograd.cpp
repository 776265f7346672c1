#include "inttower/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "inttower/errors.hpp"
#include "inttower/kernels.hpp"

namespace inttower {

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = record_;
  return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.param = &p;
  n.requires_grad = record_;
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.param != nullptr ? n.param->value : n.value;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.param != nullptr ? n.param->grad : n.grad;
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  Tensor& g = n.param != nullptr ? n.param->grad : n.grad;
  const Tensor& val = value(v);
  if (g.shape() != val.shape()) g = Tensor::zeros(val.shape());
  return g;
}

Var Graph::push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Graph::push(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  if (record_) {
    for (const Var& p : parents) needs = needs || nodes_[p.id].requires_grad;
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (!record_) throw ContractError("backward on an inference-only graph");
  if (value(loss).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(value(loss).shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss)[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace ag {

namespace {

bool needs(Var v) { return v.graph->requires_grad(v); }

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + " expects a matrix, got " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor out = ops::matmul(av, bv);
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    const std::size_t r = av.rows(), k = av.cols(), n = bv.cols();
    if (needs(a)) kernels::omp::matmul_nt_acc(go.data(), bv.data(), g.grad_buffer(a).data(), r, n, k);
    if (needs(b)) kernels::omp::matmul_tn_acc(av.data(), go.data(), g.grad_buffer(b).data(), r, k, n);
  });
}

Var transpose(Var a) {
  require_rank2(a.value(), "transpose");
  return a.graph->push(ops::transpose(a.value()), {a}, [a](Graph& g, const Tensor& go) {
    if (needs(a)) accumulate(g.grad_buffer(a), ops::transpose(go));
  });
}

Var add(Var a, Var b) {
  require_same(a.value(), b.value(), "add");
  return a.graph->push(ops::add(a.value(), b.value()), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (needs(a)) accumulate(g.grad_buffer(a), go);
    if (needs(b)) accumulate(g.grad_buffer(b), go);
  });
}

Var sub(Var a, Var b) {
  require_same(a.value(), b.value(), "sub");
  return a.graph->push(ops::add(a.value(), ops::scale(b.value(), -1.0)), {a, b},
                       [a, b](Graph& g, const Tensor& go) {
                         if (needs(a)) accumulate(g.grad_buffer(a), go);
                         if (needs(b)) accumulate(g.grad_buffer(b), go, -1.0);
                       });
}

Var add_bias(Var a, Var bias) {
  return a.graph->push(ops::add_row(a.value(), bias.value()), {a, bias}, [a, bias](Graph& g, const Tensor& go) {
    if (needs(a)) accumulate(g.grad_buffer(a), go);
    if (needs(bias)) {
      Tensor& gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < go.rows(); ++r) {
        auto row = go.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a.value(), b.value(), "mul");
  return a.graph->push(ops::mul(a.value(), b.value()), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (needs(a)) {
      Tensor& ga = g.grad_buffer(a);
      const Tensor& bv = g.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (needs(b)) {
      Tensor& gb = g.grad_buffer(b);
      const Tensor& av = g.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return a.graph->push(ops::scale(a.value(), s), {a}, [a, s](Graph& g, const Tensor& go) {
    if (needs(a)) accumulate(g.grad_buffer(a), go, s);
  });
}

Var relu(Var x) {
  return x.graph->push(ops::relu(x.value()), {x}, [x](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    const Tensor& xv = g.value(x);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv[i] > 0.0) gx[i] += go[i];
  });
}

Var sigmoid(Var x) {
  Tensor y = ops::sigmoid(x.value());
  Tensor y_copy = y;
  return x.graph->push(std::move(y), {x}, [x, y = std::move(y_copy)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
  });
}

Var log(Var x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = std::log(v);
  return x.graph->push(std::move(y), {x}, [x](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    const Tensor& xv = g.value(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] / xv[i];
  });
}

Var exp(Var x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = std::exp(v);
  Tensor y_copy = y;
  return x.graph->push(std::move(y), {x}, [x, y = std::move(y_copy)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * y[i];
  });
}

Var softmax(Var x) {
  Tensor y = ops::softmax(x.value());
  Tensor y_copy = y;
  return x.graph->push(std::move(y), {x}, [x, y = std::move(y_copy)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = go.row(r);
      const double inner = ops::dot(yr, gr);
      auto dst = gx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - inner);
    }
  });
}

Var log_softmax(Var x) {
  Tensor y = x.value();
  if (y.empty()) throw ShapeError("log_softmax of empty input");
  Tensor probs = ops::softmax(y);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (double& v : row) v -= lse;
  }
  return x.graph->push(std::move(y), {x}, [x, probs = std::move(probs)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto pr = probs.row(r);
      auto gr = go.row(r);
      double total = 0.0;
      for (double v : gr) total += v;
      auto dst = gx.row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) dst[c] += gr[c] - pr[c] * total;
    }
  });
}

Var l2_normalize(Var x, std::size_t chunk) {
  const Tensor& xv = x.value();
  if (chunk == 0) chunk = xv.cols();
  Tensor y = ops::l2_normalize_chunks(xv, chunk);
  Tensor y_copy = y;
  return x.graph->push(std::move(y), {x}, [x, chunk, y = std::move(y_copy)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    const Tensor& xv = g.value(x);
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t start = 0; start < xv.size(); start += chunk) {
      double sq = 0.0, yg = 0.0;
      for (std::size_t t = 0; t < chunk; ++t) {
        sq += xv[start + t] * xv[start + t];
        yg += y[start + t] * go[start + t];
      }
      const double norm = std::sqrt(sq);
      if (norm > kNormEpsilon) {
        for (std::size_t t = 0; t < chunk; ++t) gx[start + t] += (go[start + t] - y[start + t] * yg) / norm;
      } else {
        for (std::size_t t = 0; t < chunk; ++t) gx[start + t] += go[start + t] / kNormEpsilon;
      }
    }
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ShapeError("concat axis must be 0 or 1");
  Graph* graph = parts.front().graph;
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    require_rank2(t, "concat");
    if (axis == 1) {
      if (cols == 0 && rows == 0) rows = t.rows();
      if (t.rows() != rows) throw ShapeError("concat axis 1: row counts differ (" + shape_str(t.shape()) + ")");
      cols += t.cols();
    } else {
      if (cols == 0 && rows == 0) cols = t.cols();
      if (t.cols() != cols) throw ShapeError("concat axis 0: column counts differ (" + shape_str(t.shape()) + ")");
      rows += t.rows();
    }
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (axis == 1) {
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(t.data() + r * t.cols(), t.cols(), out.data() + r * cols + offset);
      offset += t.cols();
    } else {
      std::copy(t.values().begin(), t.values().end(), out.data() + offset * cols);
      offset += t.rows();
    }
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return graph->push(std::move(out), parts, [owned, axis](Graph& g, const Tensor& go) {
    std::size_t offset = 0;
    const std::size_t cols = go.cols();
    for (const Var& p : owned) {
      const Tensor& t = g.value(p);
      if (needs(p)) {
        Tensor& gp = g.grad_buffer(p);
        if (axis == 1) {
          for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < t.cols(); ++c) gp.at(r, c) += go[r * cols + offset + c];
        } else {
          for (std::size_t i = 0; i < t.size(); ++i) gp[i] += go[offset * cols + i];
        }
      }
      offset += axis == 1 ? t.cols() : t.rows();
    }
  });
}

Var mean(Var x, int axis) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (r == 0 || c == 0) throw ShapeError("mean of empty tensor");
  Tensor out;
  if (axis == 0) {
    out = Tensor({1, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += xv.at(i, j);
    for (double& v : out.values()) v /= static_cast<double>(r);
  } else if (axis == 1) {
    out = Tensor({r, 1});
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += xv.at(i, j);
      out[i] = s / static_cast<double>(c);
    }
  } else {
    throw ShapeError("mean axis must be 0 or 1");
  }
  return x.graph->push(std::move(out), {x}, [x, axis, r, c](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        gx[i * c + j] += axis == 0 ? go[j] / static_cast<double>(r) : go[i] / static_cast<double>(c);
  });
}

Var sum(Var x) {
  return x.graph->push(Tensor::scalar(ops::sum(x.value())), {x}, [x](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (double& v : gx.values()) v += go[0];
  });
}

Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  return x.graph->push(Tensor::scalar(s), {x}, [x](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    const Tensor& xv = g.value(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * xv[i] * go[0];
  });
}

Var row_dot(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av, bv, "row_dot");
  Tensor out({av.rows(), 1});
  for (std::size_t r = 0; r < av.rows(); ++r) out[r] = ops::dot(av.row(r), bv.row(r));
  return a.graph->push(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    const std::size_t c = av.cols();
    if (needs(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i / c] * bv[i];
    }
    if (needs(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i / c] * av[i];
    }
  });
}

Var max_cols(Var x, std::vector<std::int32_t>* argmax) {
  const Tensor& xv = x.value();
  if (xv.cols() == 0) throw ShapeError("max over zero columns");
  Tensor out({xv.rows(), 1});
  std::vector<std::int32_t> idx(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto row = xv.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    idx[r] = static_cast<std::int32_t>(best);
    out[r] = row[best];
  }
  if (argmax != nullptr) *argmax = idx;
  return x.graph->push(std::move(out), {x}, [x, idx = std::move(idx)](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < idx.size(); ++r) gx.at(r, static_cast<std::size_t>(idx[r])) += go[r];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (begin > end || end > xv.cols()) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + shape_str(xv.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({xv.rows(), w});
  for (std::size_t r = 0; r < xv.rows(); ++r) std::copy_n(xv.data() + r * xv.cols() + begin, w, out.data() + r * w);
  return x.graph->push(std::move(out), {x}, [x, begin, w](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < go.rows(); ++r)
      for (std::size_t c = 0; c < w; ++c) gx.at(r, begin + c) += go[r * w + c];
  });
}

Var reshape(Var x, Shape shape) {
  return x.graph->push(x.value().reshaped(std::move(shape)), {x}, [x](Graph& g, const Tensor& go) {
    if (needs(x)) accumulate(g.grad_buffer(x), go);
  });
}

Var diag(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.rows() != xv.cols()) throw ShapeError("diag of " + shape_str(xv.shape()));
  Tensor out({xv.rows(), 1});
  for (std::size_t i = 0; i < xv.rows(); ++i) out[i] = xv.at(i, i);
  return x.graph->push(std::move(out), {x}, [x](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx.at(i, i) += go[i];
  });
}

Var gather_rows(Var table, std::span<const std::uint32_t> ids) {
  const Tensor& tv = table.value();
  require_rank2(tv, "gather_rows");
  const std::size_t d = tv.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw IndexError("row " + std::to_string(ids[i]) + " outside table of " + std::to_string(tv.rows()) + " rows");
    }
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::uint32_t> rows(ids.begin(), ids.end());
  return table.graph->push(std::move(out), {table}, [table, d, rows = std::move(rows)](Graph& g, const Tensor& go) {
    if (!needs(table)) return;
    Tensor& gt = g.grad_buffer(table);
    Parameter* p = g.bound_param(table);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = gt.data() + rows[i] * d;
      const double* src = go.data() + i * d;
      for (std::size_t t = 0; t < d; ++t) dst[t] += src[t];
      if (p != nullptr) p->touch_row(rows[i]);
    }
  });
}

Var segment_mean(Var x, std::size_t width) {
  const Tensor& xv = x.value();
  if (width == 0 || xv.cols() % width != 0) {
    throw ShapeError("segment width " + std::to_string(width) + " does not divide " + shape_str(xv.shape()));
  }
  const std::size_t fields = xv.cols() / width;
  Tensor out({xv.rows(), fields});
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t f = 0; f < fields; ++f) {
      double s = 0.0;
      for (std::size_t t = 0; t < width; ++t) s += xv.at(r, f * width + t);
      out.at(r, f) = s / static_cast<double>(width);
    }
  return x.graph->push(std::move(out), {x}, [x, width, fields](Graph& g, const Tensor& go) {
    if (!needs(x)) return;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < go.rows(); ++r)
      for (std::size_t f = 0; f < fields; ++f) {
        const double share = go.at(r, f) / static_cast<double>(width);
        for (std::size_t t = 0; t < width; ++t) gx.at(r, f * width + t) += share;
      }
  });
}

Var segment_scale(Var x, Var w, std::size_t width) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (width == 0 || xv.cols() % width != 0 || wv.rows() != xv.rows() || wv.cols() * width != xv.cols()) {
    throw ShapeError("segment_scale: " + shape_str(xv.shape()) + " by " + shape_str(wv.shape()) + " with width " +
                     std::to_string(width));
  }
  Tensor out = xv;
  const std::size_t fields = wv.cols();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t f = 0; f < fields; ++f)
      for (std::size_t t = 0; t < width; ++t) out.at(r, f * width + t) *= wv.at(r, f);
  return x.graph->push(std::move(out), {x, w}, [x, w, width, fields](Graph& g, const Tensor& go) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    const bool gx_needed = needs(x), gw_needed = needs(w);
    Tensor* gx = gx_needed ? &g.grad_buffer(x) : nullptr;
    Tensor* gw = gw_needed ? &g.grad_buffer(w) : nullptr;
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t f = 0; f < fields; ++f) {
        double acc = 0.0;
        for (std::size_t t = 0; t < width; ++t) {
          const std::size_t c = f * width + t;
          if (gx != nullptr) gx->at(r, c) += go.at(r, c) * wv.at(r, f);
          acc += go.at(r, c) * xv.at(r, c);
        }
        if (gw != nullptr) gw->at(r, f) += acc;
      }
  });
}

Var maxsim(Var u, Var v, std::size_t head_dim) {
  const Tensor& uv = u.value();
  const Tensor& vv = v.value();
  if (head_dim == 0 || uv.rank() != 2 || vv.rank() != 2 || uv.cols() % head_dim != 0 || vv.cols() % head_dim != 0 ||
      uv.cols() == 0 || vv.cols() == 0) {
    throw ShapeError("maxsim: " + shape_str(uv.shape()) + " vs " + shape_str(vv.shape()) + " with head dim " +
                     std::to_string(head_dim));
  }
  if (uv.rows() != vv.rows()) throw ShapeError("maxsim batch mismatch: " + shape_str(uv.shape()) + " vs " + shape_str(vv.shape()));
  const std::size_t batch = uv.rows(), hu = uv.cols() / head_dim, hv = vv.cols() / head_dim;
  Tensor out({batch, 1});
  std::vector<std::int32_t> arg(batch * hu);
  kernels::omp::maxsim_rows(uv.data(), vv.data(), out.data(), arg.data(), batch, hu, hv, head_dim);
  return u.graph->push(std::move(out), {u, v}, [u, v, hu, head_dim, arg = std::move(arg)](Graph& g, const Tensor& go) {
    const Tensor& uv = g.value(u);
    const Tensor& vv = g.value(v);
    Tensor* gu = needs(u) ? &g.grad_buffer(u) : nullptr;
    Tensor* gv = needs(v) ? &g.grad_buffer(v) : nullptr;
    const std::size_t p = head_dim;
    for (std::size_t b = 0; b < uv.rows(); ++b) {
      for (std::size_t h = 0; h < hu; ++h) {
        const std::size_t win = static_cast<std::size_t>(arg[b * hu + h]);
        const double* uh = uv.data() + b * uv.cols() + h * p;
        const double* vh = vv.data() + b * vv.cols() + win * p;
        if (gu != nullptr) {
          double* dst = gu->data() + b * uv.cols() + h * p;
          for (std::size_t t = 0; t < p; ++t) dst[t] += go[b] * vh[t];
        }
        if (gv != nullptr) {
          double* dst = gv->data() + b * vv.cols() + win * p;
          for (std::size_t t = 0; t < p; ++t) dst[t] += go[b] * uh[t];
        }
      }
    }
  });
}

}  // namespace ag
}  // namespace inttower
