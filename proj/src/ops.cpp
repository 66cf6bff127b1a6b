#include "hjscc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace hjscc::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

detail::Node& input(detail::Node& self, std::size_t i) { return *self.inputs[i]; }

// Applies f(grad_out_i, i) to accumulate into an input's gradient buffer.
template <typename F>
void accumulate(detail::Node& self, std::size_t which, F&& f) {
  detail::Node& in = input(self, which);
  if (!in.requires_grad) return;
  Tensor& g = in.grad_buffer();
  const Tensor& go = self.grad;
  for (std::size_t i = 0; i < go.size(); ++i) g[i] += f(go[i], i);
}

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

double std_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

void im2col(const double* x, int channels, int height, int width, int kernel, int stride,
            int pad, int out_h, int out_w, double* cols) {
  const int out_plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill_n(dst, out_w, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int channels, int height, int width, int kernel, int stride,
            int pad, int out_h, int out_w, double* x) {
  const int out_plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row =
            cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          double* dst = x + (static_cast<std::size_t>(c) * height + iy) * width;
          const double* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& self) {
    accumulate(self, 0, [](double g, std::size_t) { return g; });
    accumulate(self, 1, [](double g, std::size_t) { return g; });
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& self) {
    accumulate(self, 0, [](double g, std::size_t) { return g; });
    accumulate(self, 1, [](double g, std::size_t) { return -g; });
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& self) {
    const Tensor& av = input(self, 0).value;
    const Tensor& bv = input(self, 1).value;
    accumulate(self, 0, [&](double g, std::size_t i) { return g * bv[i]; });
    accumulate(self, 1, [&](double g, std::size_t i) { return g * av[i]; });
  });
}

Var scale(const Var& a, double k) {
  return Var::make(map(a.value(), [k](double v) { return k * v; }), {a},
                   [k](detail::Node& self) {
                     accumulate(self, 0, [k](double g, std::size_t) { return k * g; });
                   });
}

Var add_scalar(const Var& a, double k) {
  return Var::make(map(a.value(), [k](double v) { return v + k; }), {a}, [](detail::Node& self) {
    accumulate(self, 0, [](double g, std::size_t) { return g; });
  });
}

Var mul_by_scalar(const Var& a, const Var& s) {
  const double k = s.value().item();
  return Var::make(map(a.value(), [k](double v) { return k * v; }), {a, s},
                   [k](detail::Node& self) {
                     accumulate(self, 0, [k](double g, std::size_t) { return k * g; });
                     detail::Node& sn = input(self, 1);
                     if (sn.requires_grad) {
                       const Tensor& av = input(self, 0).value;
                       double acc = 0.0;
                       for (std::size_t i = 0; i < av.size(); ++i) acc += self.grad[i] * av[i];
                       sn.grad_buffer()[0] += acc;
                     }
                   });
}

Var silu(const Var& a) {
  return Var::make(map(a.value(), [](double v) { return v / (1.0 + std::exp(-v)); }), {a},
                   [](detail::Node& self) {
                     const Tensor& av = input(self, 0).value;
                     accumulate(self, 0, [&](double g, std::size_t i) {
                       const double sig = 1.0 / (1.0 + std::exp(-av[i]));
                       return g * sig * (1.0 + av[i] * (1.0 - sig));
                     });
                   });
}

Var softplus(const Var& a) {
  auto sp = [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); };
  return Var::make(map(a.value(), sp), {a}, [](detail::Node& self) {
    const Tensor& av = input(self, 0).value;
    accumulate(self, 0,
               [&](double g, std::size_t i) { return g / (1.0 + std::exp(-av[i])); });
  });
}

Var floor_at(const Var& a, double floor) {
  return Var::make(map(a.value(), [floor](double v) { return std::max(v, floor); }), {a},
                   [floor](detail::Node& self) {
                     const Tensor& av = input(self, 0).value;
                     accumulate(self, 0, [&](double g, std::size_t i) {
                       return av[i] > floor ? g : 0.0;
                     });
                   });
}

Var clamp01(const Var& a) {
  return Var::make(map(a.value(), [](double v) { return std::clamp(v, 0.0, 1.0); }), {a},
                   [](detail::Node& self) {
                     const Tensor& av = input(self, 0).value;
                     accumulate(self, 0, [&](double g, std::size_t i) {
                       return (av[i] > 0.0 && av[i] < 1.0) ? g : 0.0;
                     });
                   });
}

Var round_straight_through(const Var& a) {
  // std::round rounds halfway cases away from zero.
  return Var::make(map(a.value(), [](double v) { return std::round(v); }), {a},
                   [](detail::Node& self) {
                     accumulate(self, 0, [](double g, std::size_t) { return g; });
                   });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const int h = parts.front().shape().h;
  const int w = parts.front().shape().w;
  int channels = 0;
  for (const auto& p : parts) {
    if (p.shape().h != h || p.shape().w != w) {
      throw ContractError("concat_channels: spatial mismatch " + p.shape().str() + " vs " +
                          parts.front().shape().str());
    }
    channels += p.shape().c;
  }
  Tensor out(Shape{channels, h, w});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().vec().begin(), p.value().vec().end(), out.vec().begin() + offset);
    offset += p.value().size();
  }
  return Var::make(std::move(out), parts, [](detail::Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      detail::Node& in = *self.inputs[k];
      const std::size_t n = in.value.size();
      if (in.requires_grad) {
        Tensor& g = in.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var slice_channels(const Var& a, int start, int count) {
  Tensor out = a.value().channels(start, count);
  const std::size_t offset = static_cast<std::size_t>(start) * a.shape().h * a.shape().w;
  return Var::make(std::move(out), {a}, [offset](detail::Node& self) {
    detail::Node& in = input(self, 0);
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int kernel, int stride, int pad) {
  const Shape in = x.shape();
  const int cout = weight.shape().c;
  const int patch = in.c * kernel * kernel;
  if (weight.shape().h != in.c || weight.shape().w != kernel * kernel) {
    throw ContractError("conv2d: weight " + weight.shape().str() + " incompatible with input " +
                        in.str());
  }
  if (bias.shape().c != cout) throw ContractError("conv2d: bias channel mismatch");
  const int out_h = (in.h + 2 * pad - kernel) / stride + 1;
  const int out_w = (in.w + 2 * pad - kernel) / stride + 1;
  if (out_h <= 0 || out_w <= 0) throw ContractError("conv2d: empty output for " + in.str());
  const int out_plane = out_h * out_w;

  const bool pointwise = kernel == 1 && stride == 1 && pad == 0;
  auto cols = std::make_shared<std::vector<double>>();
  const double* col_ptr = x.value().data();
  if (!pointwise) {
    cols->resize(static_cast<std::size_t>(patch) * out_plane);
    im2col(x.value().data(), in.c, in.h, in.w, kernel, stride, pad, out_h, out_w, cols->data());
    col_ptr = cols->data();
  }

  Tensor out(Shape{cout, out_h, out_w});
  MatrixMap out_m(out.data(), cout, out_plane);
  ConstMatrixMap w_m(weight.value().data(), cout, patch);
  ConstMatrixMap col_m(col_ptr, patch, out_plane);
  out_m.noalias() = w_m * col_m;
  for (int o = 0; o < cout; ++o) out_m.row(o).array() += bias.value()[o];

  return Var::make(
      std::move(out), {x, weight, bias},
      [=](detail::Node& self) {
        ConstMatrixMap g_m(self.grad.data(), cout, out_plane);
        detail::Node& xn = input(self, 0);
        detail::Node& wn = input(self, 1);
        detail::Node& bn = input(self, 2);
        const double* cp = pointwise ? xn.value.data() : cols->data();
        ConstMatrixMap c_m(cp, patch, out_plane);
        if (wn.requires_grad) {
          MatrixMap gw(wn.grad_buffer().data(), cout, patch);
          gw.noalias() += g_m * c_m.transpose();
        }
        if (bn.requires_grad) {
          Tensor& gb = bn.grad_buffer();
          const double* g = self.grad.data();
          for (int o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (int i = 0; i < out_plane; ++i) acc += g[static_cast<std::size_t>(o) * out_plane + i];
            gb[o] += acc;
          }
        }
        if (xn.requires_grad) {
          ConstMatrixMap wm(wn.value.data(), cout, patch);
          if (pointwise) {
            MatrixMap gx(xn.grad_buffer().data(), patch, out_plane);
            gx.noalias() += wm.transpose() * g_m;
          } else {
            std::vector<double> dcols(static_cast<std::size_t>(patch) * out_plane);
            MatrixMap dc(dcols.data(), patch, out_plane);
            dc.noalias() = wm.transpose() * g_m;
            col2im(dcols.data(), in.c, in.h, in.w, kernel, stride, pad, out_h, out_w,
                   xn.grad_buffer().data());
          }
        }
      });
}

Var upsample_nearest(const Var& x, int factor) {
  const Shape in = x.shape();
  Tensor out(Shape{in.c, in.h * factor, in.w * factor});
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < in.h * factor; ++y)
      for (int xx = 0; xx < in.w * factor; ++xx)
        out.at(c, y, xx) = x.value().at(c, y / factor, xx / factor);
  return Var::make(std::move(out), {x}, [in, factor](detail::Node& self) {
    detail::Node& xn = input(self, 0);
    if (!xn.requires_grad) return;
    Tensor& g = xn.grad_buffer();
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < in.h * factor; ++y)
        for (int xx = 0; xx < in.w * factor; ++xx)
          g.at(c, y / factor, xx / factor) += self.grad.at(c, y, xx);
  });
}

Var pixel_shuffle(const Var& x, int factor) {
  const Shape in = x.shape();
  const int r2 = factor * factor;
  if (in.c % r2 != 0) throw ContractError("pixel_shuffle: channels not divisible by factor^2");
  const int oc = in.c / r2;
  Tensor out(Shape{oc, in.h * factor, in.w * factor});
  for (int c = 0; c < oc; ++c)
    for (int i = 0; i < factor; ++i)
      for (int j = 0; j < factor; ++j)
        for (int y = 0; y < in.h; ++y)
          for (int xx = 0; xx < in.w; ++xx)
            out.at(c, y * factor + i, xx * factor + j) = x.value().at(c * r2 + i * factor + j, y, xx);
  return Var::make(std::move(out), {x}, [in, oc, factor, r2](detail::Node& self) {
    detail::Node& xn = input(self, 0);
    if (!xn.requires_grad) return;
    Tensor& g = xn.grad_buffer();
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < factor; ++i)
        for (int j = 0; j < factor; ++j)
          for (int y = 0; y < in.h; ++y)
            for (int xx = 0; xx < in.w; ++xx)
              g.at(c * r2 + i * factor + j, y, xx) += self.grad.at(c, y * factor + i, xx * factor + j);
  });
}

Var broadcast_spatial(const Var& v, int height, int width) {
  const int channels = v.shape().c;
  if (v.shape().h != 1 || v.shape().w != 1) throw ContractError("broadcast_spatial needs (C, 1, 1)");
  Tensor out(Shape{channels, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c)
    std::fill_n(out.data() + c * plane, plane, v.value()[c]);
  return Var::make(std::move(out), {v}, [channels, plane](detail::Node& self) {
    detail::Node& vn = input(self, 0);
    if (!vn.requires_grad) return;
    Tensor& g = vn.grad_buffer();
    for (int c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += self.grad[c * plane + i];
      g[c] += acc;
    }
  });
}

Var sum(const Var& a) {
  return Var::make(Tensor::scalar(a.value().sum()), {a}, [](detail::Node& self) {
    const double g = self.grad[0];
    detail::Node& in = input(self, 0);
    if (!in.requires_grad) return;
    for (auto& v : in.grad_buffer().vec()) v += g;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_squares(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().vec()) acc += v * v;
  return Var::make(Tensor::scalar(acc), {a}, [](detail::Node& self) {
    detail::Node& in = input(self, 0);
    if (!in.requires_grad) return;
    const double g = self.grad[0];
    Tensor& gi = in.grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += 2.0 * g * in.value[i];
  });
}

Var mse(const Var& a, const Var& b) { return scale(sum_squares(sub(a, b)), 1.0 / static_cast<double>(a.value().size())); }

Var neg_log_binned_gaussian(const Var& z, const Var& mean, const Var& std, double p_floor) {
  require_same_shape(z.value(), mean.value(), "neg_log_binned_gaussian");
  require_same_shape(z.value(), std.value(), "neg_log_binned_gaussian");
  const std::size_t n = z.value().size();
  Tensor out(z.shape());
  auto mass = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sigma = std.value()[i];
    if (sigma <= 0.0) throw std::domain_error("prior scale must be positive");
    // Evaluate in the upper tail for precision.
    const double d = std::abs(z.value()[i] - mean.value()[i]);
    const double k = 1.0 / (sigma * std::numbers::sqrt2);
    const double p = 0.5 * (std::erfc((d - 0.5) * k) - std::erfc((d + 0.5) * k));
    (*mass)[i] = p;
    out[i] = -std::log(std::max(p, p_floor));
  }
  return Var::make(std::move(out), {z, mean, std}, [mass, p_floor](detail::Node& self) {
    const Tensor& zv = input(self, 0).value;
    const Tensor& mv = input(self, 1).value;
    const Tensor& sv = input(self, 2).value;
    const std::size_t count = zv.size();
    std::vector<double> dz(count, 0.0), ds(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      const double p = (*mass)[i];
      if (p <= p_floor) continue;
      const double sigma = sv[i];
      const double a = (zv[i] - mv[i] + 0.5) / sigma;
      const double b = (zv[i] - mv[i] - 0.5) / sigma;
      const double pa = std_normal_pdf(a);
      const double pb = std_normal_pdf(b);
      const double g = self.grad[i] / p;
      dz[i] = -g * (pa - pb) / sigma;
      ds[i] = -g * (-a * pa + b * pb) / sigma;
    }
    accumulate(self, 0, [&](double, std::size_t i) { return dz[i]; });
    accumulate(self, 1, [&](double, std::size_t i) { return -dz[i]; });
    accumulate(self, 2, [&](double, std::size_t i) { return ds[i]; });
  });
}

Var gaussian_log_density(const Var& x, const Var& mean, double sigma) {
  require_same_shape(x.value(), mean.value(), "gaussian_log_density");
  const double var = sigma * sigma;
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = x.value()[i] - mean.value()[i];
    out[i] = norm - d * d / (2.0 * var);
  }
  return Var::make(std::move(out), {x, mean}, [var](detail::Node& self) {
    const Tensor& xv = input(self, 0).value;
    const Tensor& mv = input(self, 1).value;
    accumulate(self, 0, [&](double g, std::size_t i) { return -g * (xv[i] - mv[i]) / var; });
    accumulate(self, 1, [&](double g, std::size_t i) { return g * (xv[i] - mv[i]) / var; });
  });
}

Var sqrt_ratio(double target, const Var& s) {
  const double sv = s.value().item();
  if (!(sv > 0.0)) throw std::domain_error("sqrt_ratio: denominator must be positive");
  const double y = std::sqrt(target / sv);
  return Var::make(Tensor::scalar(y), {s}, [y, sv](detail::Node& self) {
    accumulate(self, 0, [&](double g, std::size_t) { return -g * y / (2.0 * sv); });
  });
}

}  // namespace hjscc::ops
