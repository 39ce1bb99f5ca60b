#include "gestauth/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "gestauth/error.hpp"

namespace gestauth::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MatMap as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMatMap as_mat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MatMap as_mat(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw InputError(std::string(op) + ": " + detail);
}

template <typename F, typename D>
Id elementwise(Graph& g, Id x, F f, D dfdy) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = f(xv[i]);
  return g.record(std::move(y), {x}, [x, dfdy](Graph& gr, Id self) {
    const Tensor& yv = gr.value(self);
    const Tensor& gy = gr.grad(self);
    if (!gr.requires_grad(x)) return;
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * dfdy(yv[i]);
  });
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Id dense(Graph& g, Id x, Id W, Id b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(W);
  if (wv.rank() != 2 || xv.rank() < 1 || xv.shape.back() != wv.dim(0)) {
    shape_error("dense", "input " + shape_str(xv.shape) + " vs weight " + shape_str(wv.shape));
  }
  const std::size_t in = wv.dim(0), out = wv.dim(1), rows = xv.numel() / in;
  Shape ys = xv.shape;
  ys.back() = out;
  Tensor y(ys);
  auto Y = as_mat(y, rows, out);
  Y.noalias() = as_mat(xv, rows, in) * as_mat(wv, in, out);
  Y.rowwise() += ConstVecMap(g.value(b).data.data(), static_cast<Eigen::Index>(out));
  return g.record(std::move(y), {x, W, b}, [x, W, b, in, out, rows](Graph& gr, Id self) {
    const auto GY = as_mat(gr.grad(self), rows, out);
    if (gr.requires_grad(W)) as_mat(gr.grad(W), in, out).noalias() += as_mat(gr.value(x), rows, in).transpose() * GY;
    if (gr.requires_grad(b)) VecMap(gr.grad(b).data.data(), static_cast<Eigen::Index>(out)) += GY.colwise().sum();
    if (gr.requires_grad(x)) as_mat(gr.grad(x), rows, in).noalias() += GY * as_mat(gr.value(W), in, out).transpose();
  });
}

Id conv1d(Graph& g, Id x, Id W, Id b, Padding padding) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(W);
  if (xv.rank() != 3 || wv.rank() != 3 || xv.dim(2) != wv.dim(1)) {
    shape_error("conv1d", "input " + shape_str(xv.shape) + " vs kernel " + shape_str(wv.shape));
  }
  const std::size_t B = xv.dim(0), T = xv.dim(1), cin = xv.dim(2);
  const std::size_t k = wv.dim(0), cout = wv.dim(2);
  const std::size_t left = padding == Padding::same ? (k - 1) / 2 : 0;
  if (padding == Padding::valid && T < k) shape_error("conv1d", "sequence shorter than kernel");
  const std::size_t tout = padding == Padding::same ? T : T - k + 1;
  const std::size_t rows = B * tout, width = k * cin;

  // im2col: row (b, t) holds the k input frames feeding output step t.
  std::vector<double> cols(rows * width, 0.0);
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t t = 0; t < tout; ++t) {
      double* dst = cols.data() + (bi * tout + t) * width;
      for (std::size_t j = 0; j < k; ++j) {
        const auto src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* s = xv.data.data() + (bi * T + static_cast<std::size_t>(src)) * cin;
        std::copy(s, s + cin, dst + j * cin);
      }
    }
  }
  Tensor y({B, tout, cout});
  auto Y = as_mat(y, rows, cout);
  Y.noalias() = as_mat(cols, rows, width) * as_mat(wv, width, cout);
  Y.rowwise() += ConstVecMap(g.value(b).data.data(), static_cast<Eigen::Index>(cout));

  return g.record(std::move(y), {x, W, b},
                  [x, W, b, cols = std::move(cols), B, T, cin, k, cout, left, tout, rows, width](Graph& gr, Id self) {
                    const auto GY = as_mat(gr.grad(self), rows, cout);
                    if (gr.requires_grad(W))
                      as_mat(gr.grad(W), width, cout).noalias() += as_mat(cols, rows, width).transpose() * GY;
                    if (gr.requires_grad(b))
                      VecMap(gr.grad(b).data.data(), static_cast<Eigen::Index>(cout)) += GY.colwise().sum();
                    if (!gr.requires_grad(x)) return;
                    RowMat dcols = GY * as_mat(gr.value(W), width, cout).transpose();
                    Tensor& gx = gr.grad(x);
                    for (std::size_t bi = 0; bi < B; ++bi) {
                      for (std::size_t t = 0; t < tout; ++t) {
                        const double* src = dcols.data() + (bi * tout + t) * width;
                        for (std::size_t j = 0; j < k; ++j) {
                          const auto pos = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(left);
                          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(T)) continue;
                          double* dst = gx.data.data() + (bi * T + static_cast<std::size_t>(pos)) * cin;
                          for (std::size_t c = 0; c < cin; ++c) dst[c] += src[j * cin + c];
                        }
                      }
                    }
                  });
}

Id maxpool1d(Graph& g, Id x, std::size_t window, std::size_t stride) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || window == 0 || stride == 0) shape_error("maxpool1d", "expects [B,T,C] input");
  const std::size_t B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
  const std::size_t tout = T <= window ? 1 : (T - window + stride - 1) / stride + 1;
  Tensor y({B, tout, C});
  std::vector<std::size_t> argmax(B * tout * C);
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t t = 0; t < tout; ++t) {
      const std::size_t lo = t * stride, hi = std::min(T, lo + window);
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = lo;
        for (std::size_t s = lo + 1; s < hi; ++s) {
          if (xv[(bi * T + s) * C + c] > xv[(bi * T + best) * C + c]) best = s;
        }
        const std::size_t o = (bi * tout + t) * C + c;
        y[o] = xv[(bi * T + best) * C + c];
        argmax[o] = (bi * T + best) * C + c;
      }
    }
  }
  return g.record(std::move(y), {x}, [x, argmax = std::move(argmax)](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += gy[o];
  });
}

Id upsample1d(Graph& g, Id x, std::size_t factor) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || factor == 0) shape_error("upsample1d", "expects [B,T,C] input");
  const std::size_t B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
  Tensor y({B, T * factor, C});
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t t = 0; t < T * factor; ++t)
      for (std::size_t c = 0; c < C; ++c) y[(bi * T * factor + t) * C + c] = xv[(bi * T + t / factor) * C + c];
  return g.record(std::move(y), {x}, [x, B, T, C, factor](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t t = 0; t < T * factor; ++t)
        for (std::size_t c = 0; c < C; ++c) gx[(bi * T + t / factor) * C + c] += gy[(bi * T * factor + t) * C + c];
  });
}

Id gru(Graph& g, Id x, Id Wx, Id Wh, Id bx, Id bh, bool return_sequences) {
  const Tensor& xv = g.value(x);
  const Tensor& wxv = g.value(Wx);
  const Tensor& whv = g.value(Wh);
  if (xv.rank() != 3 || wxv.rank() != 2 || whv.rank() != 2 || xv.dim(2) != wxv.dim(0) ||
      wxv.dim(1) != 3 * whv.dim(0) || whv.dim(1) != wxv.dim(1)) {
    shape_error("gru", "input " + shape_str(xv.shape) + " vs kernels " + shape_str(wxv.shape) + ", " +
                           shape_str(whv.shape));
  }
  const std::size_t B = xv.dim(0), T = xv.dim(1), in = xv.dim(2), h = whv.dim(0), h3 = 3 * h;
  const auto eh = static_cast<Eigen::Index>(h);

  // Input projections for every step at once: [B*T, 3h], row (b, t).
  std::vector<double> xw(B * T * h3);
  {
    auto XW = as_mat(xw, B * T, h3);
    XW.noalias() = as_mat(xv, B * T, in) * as_mat(wxv, in, h3);
    XW.rowwise() += ConstVecMap(g.value(bx).data.data(), static_cast<Eigen::Index>(h3));
  }
  // Per-step caches, each [T][B x ...].
  std::vector<double> hs((T + 1) * B * h, 0.0);  // hs[0] = initial zero state
  std::vector<double> zs(T * B * h), rs(T * B * h), ns(T * B * h), hun(T * B * h);
  RowMat hu(B, h3);
  const ConstVecMap bhv(g.value(bh).data.data(), static_cast<Eigen::Index>(h3));
  for (std::size_t t = 0; t < T; ++t) {
    const ConstMatMap Hprev(hs.data() + t * B * h, static_cast<Eigen::Index>(B), eh);
    hu.noalias() = Hprev * as_mat(whv, h, h3);
    hu.rowwise() += bhv;
    for (std::size_t bi = 0; bi < B; ++bi) {
      const double* xr = xw.data() + (bi * T + t) * h3;
      const double* hr = hu.data() + bi * h3;
      const std::size_t o = t * B * h + bi * h;
      for (std::size_t j = 0; j < h; ++j) {
        const double z = sigmoid(xr[j] + hr[j]);
        const double r = sigmoid(xr[h + j] + hr[h + j]);
        const double n = std::tanh(xr[2 * h + j] + r * hr[2 * h + j]);
        zs[o + j] = z;
        rs[o + j] = r;
        ns[o + j] = n;
        hun[o + j] = hr[2 * h + j];
        hs[(t + 1) * B * h + bi * h + j] = z * Hprev(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(j)) +
                                           (1.0 - z) * n;
      }
    }
  }

  Tensor y = return_sequences ? Tensor({B, T, h}) : Tensor({B, h});
  if (return_sequences) {
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t t = 0; t < T; ++t)
        std::copy_n(hs.data() + (t + 1) * B * h + bi * h, h, y.data.data() + (bi * T + t) * h);
  } else {
    std::copy_n(hs.data() + T * B * h, B * h, y.data.data());
  }

  return g.record(
      std::move(y), {x, Wx, Wh, bx, bh},
      [=, hs = std::move(hs), zs = std::move(zs), rs = std::move(rs), ns = std::move(ns),
       hun = std::move(hun)](Graph& gr, Id self) {
        const Tensor& gy = gr.grad(self);
        std::vector<double> dxw(B * T * h3, 0.0);
        RowMat dh = RowMat::Zero(static_cast<Eigen::Index>(B), eh);
        RowMat dhu(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(h3));
        const auto WH = as_mat(gr.value(Wh), h, h3);
        RowMat dWh = RowMat::Zero(eh, static_cast<Eigen::Index>(h3));
        Eigen::RowVectorXd dbh = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(h3));
        if (!return_sequences) dh += as_mat(gy, B, h);
        for (std::size_t t = T; t-- > 0;) {
          if (return_sequences) {
            for (std::size_t bi = 0; bi < B; ++bi)
              for (std::size_t j = 0; j < h; ++j)
                dh(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(j)) += gy[(bi * T + t) * h + j];
          }
          const double* hprev = hs.data() + t * B * h;
          RowMat dh_prev(static_cast<Eigen::Index>(B), eh);
          for (std::size_t bi = 0; bi < B; ++bi) {
            const std::size_t o = t * B * h + bi * h;
            double* dxr = dxw.data() + (bi * T + t) * h3;
            for (std::size_t j = 0; j < h; ++j) {
              const auto ib = static_cast<Eigen::Index>(bi), ij = static_cast<Eigen::Index>(j);
              const double d = dh(ib, ij);
              const double z = zs[o + j], r = rs[o + j], n = ns[o + j];
              const double dz = d * (hprev[bi * h + j] - n);
              const double dn_pre = d * (1.0 - z) * (1.0 - n * n);
              const double dr_pre = dn_pre * hun[o + j] * r * (1.0 - r);
              const double dz_pre = dz * z * (1.0 - z);
              dxr[j] = dz_pre;
              dxr[h + j] = dr_pre;
              dxr[2 * h + j] = dn_pre;
              dhu(ib, ij) = dz_pre;
              dhu(ib, static_cast<Eigen::Index>(h + j)) = dr_pre;
              dhu(ib, static_cast<Eigen::Index>(2 * h + j)) = dn_pre * r;
              dh_prev(ib, ij) = d * z;
            }
          }
          const auto Hprev = ConstMatMap(hprev, static_cast<Eigen::Index>(B), eh);
          dWh.noalias() += Hprev.transpose() * dhu;
          dbh += dhu.colwise().sum();
          dh_prev.noalias() += dhu * WH.transpose();
          dh = std::move(dh_prev);
        }
        if (gr.requires_grad(Wh)) as_mat(gr.grad(Wh), h, h3) += dWh;
        if (gr.requires_grad(bh)) VecMap(gr.grad(bh).data.data(), static_cast<Eigen::Index>(h3)) += dbh;
        const auto DXW = as_mat(dxw, B * T, h3);
        if (gr.requires_grad(Wx)) as_mat(gr.grad(Wx), in, h3).noalias() += as_mat(gr.value(x), B * T, in).transpose() * DXW;
        if (gr.requires_grad(bx)) VecMap(gr.grad(bx).data.data(), static_cast<Eigen::Index>(h3)) += DXW.colwise().sum();
        if (gr.requires_grad(x)) as_mat(gr.grad(x), B * T, in).noalias() += DXW * as_mat(gr.value(Wx), in, h3).transpose();
      });
}

Id relu(Graph& g, Id x) {
  return elementwise(g, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Id sigmoid(Graph& g, Id x) {
  return elementwise(g, x, [](double v) { return sigmoid(v); }, [](double y) { return y * (1.0 - y); });
}

Id tanh(Graph& g, Id x) {
  return elementwise(g, x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Id concat(Graph& g, const std::vector<Id>& parts) {
  if (parts.empty()) shape_error("concat", "no inputs");
  const Shape& s0 = g.value(parts[0]).shape;
  const std::size_t rows = numel(s0) / s0.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (auto p : parts) {
    const Shape& s = g.value(p).shape;
    if (s.size() != s0.size() || !std::equal(s.begin(), s.end() - 1, s0.begin())) {
      shape_error("concat", shape_str(s) + " vs " + shape_str(s0));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape ys = s0;
  ys.back() = total;
  Tensor y(ys);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = g.value(parts[p]);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.data.data() + r * widths[p], widths[p], y.data.data() + r * total + off);
    off += widths[p];
  }
  return g.record(std::move(y), parts, [parts, widths, rows, total](Graph& gr, Id self) {
    const Tensor& gy = gr.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (gr.requires_grad(parts[p])) {
        Tensor& gx = gr.grad(parts[p]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[p]; ++c) gx[r * widths[p] + c] += gy[r * total + off + c];
      }
      off += widths[p];
    }
  });
}

Id flatten(Graph& g, Id x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() < 1) shape_error("flatten", "scalar input");
  Tensor y({xv.dim(0), xv.numel() / xv.dim(0)}, xv.data);
  return g.record(std::move(y), {x}, [x](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
  });
}

Id repeat_steps(Graph& g, Id x, std::size_t steps) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2) shape_error("repeat_steps", "expects [B,d] input");
  const std::size_t B = xv.dim(0), d = xv.dim(1);
  Tensor y({B, steps, d});
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t t = 0; t < steps; ++t) std::copy_n(xv.data.data() + bi * d, d, y.data.data() + (bi * steps + t) * d);
  return g.record(std::move(y), {x}, [x, B, d, steps](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t j = 0; j < d; ++j) gx[bi * d + j] += gy[(bi * steps + t) * d + j];
  });
}

Id slice_last(Graph& g, Id x, std::size_t begin, std::size_t end) {
  const Tensor& xv = g.value(x);
  if (xv.rank() < 1 || begin >= end || end > xv.shape.back()) shape_error("slice_last", "bad range");
  const std::size_t width = xv.shape.back(), rows = xv.numel() / width, w = end - begin;
  Shape ys = xv.shape;
  ys.back() = w;
  Tensor y(ys);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data.data() + r * width + begin, w, y.data.data() + r * w);
  return g.record(std::move(y), {x}, [x, rows, width, begin, w](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) gx[r * width + begin + c] += gy[r * w + c];
  });
}

Id add(Graph& g, Id a, Id b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.shape != bv.shape) shape_error("add", shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor y(av.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
  return g.record(std::move(y), {a, b}, [a, b](Graph& gr, Id self) {
    const Tensor& gy = gr.grad(self);
    for (Id p : {a, b}) {
      if (!gr.requires_grad(p)) continue;
      Tensor& gp = gr.grad(p);
      for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += gy[i];
    }
  });
}

}  // namespace gestauth::nn
