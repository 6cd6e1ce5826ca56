// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fairview/rng.hpp"
#include "fairview/tensor.hpp"

namespace fairview::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;  // null for buffers (running statistics)
};

/// Layer contract: forward() may cache activations needed by backward();
/// backward() consumes the most recent cached forward. `train` controls
/// batch-statistics collection only (no layer here uses dropout-style
/// stochasticity, so forward is deterministic in both modes).
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train, bool keep_cache) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads) = 0;
  virtual void init(Rng& /*rng*/) {}
  virtual void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
};

namespace detail {

template <typename T>
void add_bias_rows(Tensor<T>& y, const Tensor<T>& b, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* yr = y.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) yr[c] += b[c];
  }
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace detail

template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {
    weight_ = Tensor<T>({out, in});
    bias_ = Tensor<T>({out});
    dweight_ = Tensor<T>({out, in});
    dbias_ = Tensor<T>({out});
  }

  void init(Rng& rng) override {
    const T std = static_cast<T>(std::sqrt(2.0 / static_cast<double>(in_)));
    for (auto& v : weight_.vec()) v = static_cast<T>(rng.normal()) * std;
    bias_.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    const std::size_t n = x.count() / in_;
    Tensor<T> y({n, out_});
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> wm(weight_.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    detail::add_bias_rows(y, bias_, n, out_);
    if (keep_cache) cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate) override {
    const std::size_t n = dy.count() / out_;
    ConstMatMap<T> dym(dy.data(), n, out_);
    ConstMatMap<T> xm(cache_.data(), n, in_);
    ConstMatMap<T> wm(weight_.data(), out_, in_);
    if (accumulate) {
      MatMap<T> dwm(dweight_.data(), out_, in_);
      dwm.noalias() += dym.transpose() * xm;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < out_; ++c) dbias_[c] += dy[r * out_ + c];
    }
    Tensor<T> dx(cache_.shape());
    MatMap<T> dxm(dx.data(), n, in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  Tensor<T>& weight() { return weight_; }

 private:
  std::size_t in_, out_;
  Tensor<T> weight_, bias_, dweight_, dbias_, cache_;
};

/// 3x3 convolution with zero padding 1 and stride 1 or 2. Implemented as
/// per-image im2col + GEMM; im2col is recomputed in backward from the cached
/// input rather than stored.
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::size_t in_c, std::size_t out_c, std::size_t stride = 1)
      : in_c_(in_c), out_c_(out_c), stride_(stride) {
    weight_ = Tensor<T>({out_c, in_c * 9});
    bias_ = Tensor<T>({out_c});
    dweight_ = Tensor<T>({out_c, in_c * 9});
    dbias_ = Tensor<T>({out_c});
  }

  void init(Rng& rng) override {
    const T std = static_cast<T>(std::sqrt(2.0 / static_cast<double>(in_c_ * 9)));
    for (auto& v : weight_.vec()) v = static_cast<T>(rng.normal()) * std;
    bias_.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = out_extent(h), ow = out_extent(w);
    Tensor<T> y({n, out_c_, oh, ow});
    ConstMatMap<T> wm(weight_.data(), out_c_, in_c_ * 9);
    const std::size_t patch = in_c_ * 9, cols = oh * ow;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ni = 0; ni < static_cast<std::ptrdiff_t>(n); ++ni) {
      std::vector<T> col(patch * cols);
      im2col(x.data() + ni * in_c_ * h * w, h, w, col.data());
      ConstMatMap<T> cm(col.data(), patch, cols);
      MatMap<T> ym(y.data() + ni * out_c_ * cols, out_c_, cols);
      ym.noalias() = wm * cm;
      for (std::size_t c = 0; c < out_c_; ++c)
        for (std::size_t p = 0; p < cols; ++p) ym(c, p) += bias_[c];
    }
    if (keep_cache) cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate) override {
    const std::size_t n = cache_.dim(0), h = cache_.dim(2), w = cache_.dim(3);
    const std::size_t oh = out_extent(h), ow = out_extent(w);
    const std::size_t patch = in_c_ * 9, cols = oh * ow;
    Tensor<T> dx(cache_.shape());
    ConstMatMap<T> wm(weight_.data(), out_c_, patch);

    const int nthreads = detail::thread_count();
    std::vector<Tensor<T>> dw_part(static_cast<std::size_t>(nthreads),
                                   Tensor<T>({out_c_, patch}));
    std::vector<Tensor<T>> db_part(static_cast<std::size_t>(nthreads), Tensor<T>({out_c_}));

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ni = 0; ni < static_cast<std::ptrdiff_t>(n); ++ni) {
#ifdef _OPENMP
      const int tid = omp_get_thread_num();
#else
      const int tid = 0;
#endif
      std::vector<T> col(patch * cols), dcol(patch * cols);
      im2col(cache_.data() + ni * in_c_ * h * w, h, w, col.data());
      ConstMatMap<T> dym(dy.data() + ni * out_c_ * cols, out_c_, cols);
      if (accumulate) {
        ConstMatMap<T> cm(col.data(), patch, cols);
        MatMap<T> dwm(dw_part[static_cast<std::size_t>(tid)].data(), out_c_, patch);
        dwm.noalias() += dym * cm.transpose();
        auto& db = db_part[static_cast<std::size_t>(tid)];
        for (std::size_t c = 0; c < out_c_; ++c) db[c] += dym.row(c).sum();
      }
      MatMap<T> dcm(dcol.data(), patch, cols);
      dcm.noalias() = wm.transpose() * dym;
      col2im(dcol.data(), h, w, dx.data() + ni * in_c_ * h * w);
    }
    if (accumulate) {
      // Fixed-order reduction over per-thread partials keeps results
      // reproducible for a given thread count.
      for (int t = 0; t < nthreads; ++t) {
        for (std::size_t i = 0; i < dweight_.size(); ++i)
          dweight_[i] += dw_part[static_cast<std::size_t>(t)][i];
        for (std::size_t c = 0; c < out_c_; ++c) dbias_[c] += db_part[static_cast<std::size_t>(t)][c];
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

 private:
  std::size_t out_extent(std::size_t in) const { return (in + 2 - 3) / stride_ + 1; }

  void im2col(const T* img, std::size_t h, std::size_t w, T* col) const {
    const std::size_t oh = out_extent(h), ow = out_extent(w), cols = oh * ow;
    for (std::size_t c = 0; c < in_c_; ++c) {
      const T* plane = img + c * h * w;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T* row = col + (c * 9 + ky * 3 + kx) * cols;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride_ + ky) - 1;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride_ + kx) - 1;
              row[oy * ow + ox] =
                  (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                   ix < static_cast<std::ptrdiff_t>(w))
                      ? plane[iy * static_cast<std::ptrdiff_t>(w) + ix]
                      : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const T* dcol, std::size_t h, std::size_t w, T* dimg) const {
    const std::size_t oh = out_extent(h), ow = out_extent(w), cols = oh * ow;
    for (std::size_t i = 0; i < in_c_ * h * w; ++i) dimg[i] = T(0);
    for (std::size_t c = 0; c < in_c_; ++c) {
      T* plane = dimg + c * h * w;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const T* row = dcol + (c * 9 + ky * 3 + kx) * cols;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride_ + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride_ + kx) - 1;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              plane[iy * static_cast<std::ptrdiff_t>(w) + ix] += row[oy * ow + ox];
            }
          }
        }
      }
    }
  }

  std::size_t in_c_, out_c_, stride_;
  Tensor<T> weight_, bias_, dweight_, dbias_, cache_;
};

/// Per-channel batch normalization over (N, H, W). In train mode batch
/// statistics normalize the activations and the running buffers are updated;
/// in eval mode the running buffers normalize and nothing is written. The
/// classifier's neighbor-view forwards rely on eval mode leaving the buffers
/// bit-identical.
template <typename T>
class BatchNorm2d : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, T momentum = T(0.1), T eps = T(1e-5))
      : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor<T>({c_});
    beta_ = Tensor<T>({c_});
    dgamma_ = Tensor<T>({c_});
    dbeta_ = Tensor<T>({c_});
    running_mean_ = Tensor<T>({c_});
    running_var_ = Tensor<T>({c_});
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, bool keep_cache) override {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = h * w, m = n * plane;
    Tensor<T> y(x.shape());
    Tensor<T> mean({c_}), var({c_});
    if (train) {
      for (std::size_t c = 0; c < c_; ++c) {
        double sum = 0.0;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const T* p = x.data() + (ni * c_ + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += static_cast<double>(p[i]);
        }
        mean[c] = static_cast<T>(sum / static_cast<double>(m));
        double sq = 0.0;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const T* p = x.data() + (ni * c_ + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(p[i]) - static_cast<double>(mean[c]);
            sq += d * d;
          }
        }
        var[c] = static_cast<T>(sq / static_cast<double>(m));  // biased, used to normalize
        const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : 0.0;
        running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean[c]);
        running_var_[c] =
            static_cast<T>((1 - momentum_) * static_cast<double>(running_var_[c]) +
                           static_cast<double>(momentum_) * unbiased);
      }
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    Tensor<T> inv_std({c_});
    for (std::size_t c = 0; c < c_; ++c)
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[c]) +
                                                  static_cast<double>(eps_)));
    for (std::size_t ni = 0; ni < n; ++ni) {
      for (std::size_t c = 0; c < c_; ++c) {
        const T* p = x.data() + (ni * c_ + c) * plane;
        T* q = y.data() + (ni * c_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          q[i] = gamma_[c] * (p[i] - mean[c]) * inv_std[c] + beta_[c];
      }
    }
    if (keep_cache) {
      cache_x_ = x;
      cache_mean_ = mean;
      cache_inv_std_ = inv_std;
      cache_train_ = train;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate) override {
    const std::size_t n = cache_x_.dim(0), h = cache_x_.dim(2), w = cache_x_.dim(3);
    const std::size_t plane = h * w, m = n * plane;
    Tensor<T> dx(cache_x_.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t ni = 0; ni < n; ++ni) {
        const T* xr = cache_x_.data() + (ni * c_ + c) * plane;
        const T* dr = dy.data() + (ni * c_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat =
              (static_cast<double>(xr[i]) - static_cast<double>(cache_mean_[c])) *
              static_cast<double>(cache_inv_std_[c]);
          sum_dy += static_cast<double>(dr[i]);
          sum_dy_xhat += static_cast<double>(dr[i]) * xhat;
        }
      }
      if (accumulate) {
        dgamma_[c] += static_cast<T>(sum_dy_xhat);
        dbeta_[c] += static_cast<T>(sum_dy);
      }
      const double g = static_cast<double>(gamma_[c]);
      const double istd = static_cast<double>(cache_inv_std_[c]);
      for (std::size_t ni = 0; ni < n; ++ni) {
        const T* xr = cache_x_.data() + (ni * c_ + c) * plane;
        const T* dr = dy.data() + (ni * c_ + c) * plane;
        T* dxr = dx.data() + (ni * c_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat = (static_cast<double>(xr[i]) -
                               static_cast<double>(cache_mean_[c])) * istd;
          if (cache_train_) {
            dxr[i] = static_cast<T>(
                g * istd *
                (static_cast<double>(dr[i]) - sum_dy / static_cast<double>(m) -
                 xhat * sum_dy_xhat / static_cast<double>(m)));
          } else {
            dxr[i] = static_cast<T>(g * istd * static_cast<double>(dr[i]));
          }
        }
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_});
    out.push_back({prefix + ".beta", &beta_, &dbeta_});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
    out.push_back({prefix + ".running_var", &running_var_, nullptr});
  }

 private:
  std::size_t c_;
  T momentum_, eps_;
  Tensor<T> gamma_, beta_, dgamma_, dbeta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> cache_x_, cache_mean_, cache_inv_std_;
  bool cache_train_ = true;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
    if (keep_cache) cache_ = x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx(cache_.shape());
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = cache_[i] > T(0) ? dy[i] : slope_ * dy[i];
    return dx;
  }

 private:
  T slope_;
  Tensor<T> cache_;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    if (keep_cache) cache_y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx(cache_y_.shape());
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = dy[i] * (T(1) - cache_y_[i] * cache_y_[i]);
    return dx;
  }

 private:
  Tensor<T> cache_y_;
};

/// softplus(x) = log(1 + e^x); keeps evidence outputs nonnegative with live
/// gradients at zero.
template <typename T>
class Softplus : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T v = x[i];
      y[i] = v > T(30) ? v : (v < T(-30) ? std::exp(v) : std::log1p(std::exp(v)));
    }
    if (keep_cache) cache_ = x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx(cache_.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T v = cache_[i];
      const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                              : std::exp(v) / (T(1) + std::exp(v));
      dx[i] = dy[i] * sig;
    }
    return dx;
  }

 private:
  Tensor<T> cache_;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* p = x.data() + (ni * c + ci) * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += static_cast<double>(p[i]);
        y[ni * c + ci] = static_cast<T>(s / static_cast<double>(plane));
      }
    if (keep_cache) in_shape_ = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx(in_shape_);
    const std::size_t n = in_shape_[0], c = in_shape_[1], plane = in_shape_[2] * in_shape_[3];
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T g = dy[ni * c + ci] / static_cast<T>(plane);
        T* p = dx.data() + (ni * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = g;
      }
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Upsample2x : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* src = x.data() + (ni * c + ci) * h * w;
        T* dst = y.data() + (ni * c + ci) * 4 * h * w;
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx) {
            const T v = src[yy * w + xx];
            dst[(2 * yy) * 2 * w + 2 * xx] = v;
            dst[(2 * yy) * 2 * w + 2 * xx + 1] = v;
            dst[(2 * yy + 1) * 2 * w + 2 * xx] = v;
            dst[(2 * yy + 1) * 2 * w + 2 * xx + 1] = v;
          }
      }
    if (keep_cache) in_shape_ = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx(in_shape_);
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* src = dy.data() + (ni * c + ci) * 4 * h * w;
        T* dst = dx.data() + (ni * c + ci) * h * w;
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx)
            dst[yy * w + xx] = src[(2 * yy) * 2 * w + 2 * xx] +
                               src[(2 * yy) * 2 * w + 2 * xx + 1] +
                               src[(2 * yy + 1) * 2 * w + 2 * xx] +
                               src[(2 * yy + 1) * 2 * w + 2 * xx + 1];
      }
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Flatten : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool, bool keep_cache) override {
    Tensor<T> y = x;
    const std::size_t n = x.dim(0);
    y.reshape({n, x.count() / n});
    if (keep_cache) in_shape_ = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    Tensor<T> dx = dy;
    dx.reshape(in_shape_);
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Style-modulated constant input: maps a batch of style codes (N, d_w) to a
/// feature map (N, C, S, S). A learned constant basis is modulated channel-
/// wise with scale and shift, [s; t] = A w + b (one affine layer):
/// out[c] = basis[c] * s[c] + t[c]. A (shape 2C x d_w) is the generator's
/// first and only latent-consuming affine weight; the factorization stage
/// retrieves it by name.
template <typename T>
class StyleInput : public Layer<T> {
 public:
  StyleInput(std::size_t d_w, std::size_t channels, std::size_t spatial)
      : d_w_(d_w), c_(channels), s_(spatial) {
    basis_ = Tensor<T>({c_, s_, s_});
    affine_w_ = Tensor<T>({2 * c_, d_w_});
    affine_b_ = Tensor<T>({2 * c_});
    dbasis_ = Tensor<T>({c_, s_, s_});
    daffine_w_ = Tensor<T>({2 * c_, d_w_});
    daffine_b_ = Tensor<T>({2 * c_});
  }

  void init(Rng& rng) override {
    for (auto& v : basis_.vec()) v = static_cast<T>(rng.normal());
    const T std = static_cast<T>(std::sqrt(1.0 / static_cast<double>(d_w_)));
    for (auto& v : affine_w_.vec()) v = static_cast<T>(rng.normal()) * std;
    // identity modulation at w = 0: scale 1, shift 0
    for (std::size_t c = 0; c < c_; ++c) affine_b_[c] = T(1);
    for (std::size_t c = c_; c < 2 * c_; ++c) affine_b_[c] = T(0);
  }

  Tensor<T> forward(const Tensor<T>& w, bool, bool keep_cache) override {
    const std::size_t n = w.dim(0);
    Tensor<T> style({n, 2 * c_});
    ConstMatMap<T> wm(w.data(), n, d_w_);
    ConstMatMap<T> am(affine_w_.data(), 2 * c_, d_w_);
    MatMap<T> sm(style.data(), n, 2 * c_);
    sm.noalias() = wm * am.transpose();
    detail::add_bias_rows(style, affine_b_, n, 2 * c_);

    const std::size_t plane = s_ * s_;
    Tensor<T> y({n, c_, s_, s_});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c_; ++ci) {
        const T scale = style[ni * 2 * c_ + ci];
        const T shift = style[ni * 2 * c_ + c_ + ci];
        const T* b = basis_.data() + ci * plane;
        T* q = y.data() + (ni * c_ + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = b[i] * scale + shift;
      }
    if (keep_cache) {
      cache_w_ = w;
      cache_style_ = style;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate) override {
    const std::size_t n = cache_w_.dim(0), plane = s_ * s_;
    Tensor<T> dstyle({n, 2 * c_});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c_; ++ci) {
        const T* b = basis_.data() + ci * plane;
        const T* g = dy.data() + (ni * c_ + ci) * plane;
        double dscale = 0.0, dshift = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          dscale += static_cast<double>(b[i] * g[i]);
          dshift += static_cast<double>(g[i]);
        }
        dstyle[ni * 2 * c_ + ci] = static_cast<T>(dscale);
        dstyle[ni * 2 * c_ + c_ + ci] = static_cast<T>(dshift);
        if (accumulate) {
          const T sg = cache_style_[ni * 2 * c_ + ci];
          T* db = dbasis_.data() + ci * plane;
          for (std::size_t i = 0; i < plane; ++i) db[i] += g[i] * sg;
        }
      }
    if (accumulate) {
      ConstMatMap<T> dsm(dstyle.data(), n, 2 * c_);
      ConstMatMap<T> wm(cache_w_.data(), n, d_w_);
      MatMap<T> dam(daffine_w_.data(), 2 * c_, d_w_);
      dam.noalias() += dsm.transpose() * wm;
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < 2 * c_; ++ci)
          daffine_b_[ci] += dstyle[ni * 2 * c_ + ci];
    }
    Tensor<T> dw({n, d_w_});
    ConstMatMap<T> dsm(dstyle.data(), n, 2 * c_);
    ConstMatMap<T> am(affine_w_.data(), 2 * c_, d_w_);
    MatMap<T> dwm(dw.data(), n, d_w_);
    dwm.noalias() = dsm * am;
    return dw;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".basis", &basis_, &dbasis_});
    out.push_back({prefix + ".affine_weight", &affine_w_, &daffine_w_});
    out.push_back({prefix + ".affine_bias", &affine_b_, &daffine_b_});
  }

 private:
  std::size_t d_w_, c_, s_;
  Tensor<T> basis_, affine_w_, affine_b_;
  Tensor<T> dbasis_, daffine_w_, daffine_b_;
  Tensor<T> cache_w_, cache_style_;
};

}  // namespace fairview::nn
