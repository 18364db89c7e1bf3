#include "foregan/net.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "foregan/errors.hpp"

namespace foregan {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int conv_out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// Unrolls (C,H,W) into a (C*k*k) x (oh*ow) patch matrix.
void im2col(const double* img, int ch, int h, int w, int kernel, int stride, int pad, int oh,
            int ow, double* col) {
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                double* row = col + (static_cast<std::size_t>((c * kernel + ki) * kernel + kj)) *
                                        static_cast<std::size_t>(oh * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? img[(c * h + iy) * w + ix]
                                                : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates patch columns back into the (C,H,W) image.
void col2im(const double* col, int ch, int h, int w, int kernel, int stride, int pad, int oh,
            int ow, double* img) {
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                const double* row =
                    col + (static_cast<std::size_t>((c * kernel + ki) * kernel + kj)) *
                              static_cast<std::size_t>(oh * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        if (ix < 0 || ix >= w) continue;
                        img[(c * h + iy) * w + ix] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

Tensor init_weights(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

} // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_features, int out_features, Rng& rng, double init_std)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(init_weights({out_features, in_features}, rng, init_std)),
      bias_(Tensor({out_features})),
      gweight_(Tensor({out_features, in_features})),
      gbias_(Tensor({out_features})) {}

Tensor Dense::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_features_)
        throw ShapeError("dense: expected (N," + std::to_string(in_features_) + ") input");
    input_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_features_});
    ConstMatMap xm(x.data(), n, in_features_);
    ConstMatMap wm(weight_.data(), out_features_, in_features_);
    MatMap ym(y.data(), n, out_features_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_features_; ++j) y.at(i, j) += bias_[j];
    return y;
}

Tensor Dense::backward(const Tensor& gy) {
    const int n = input_.dim(0);
    ConstMatMap gym(gy.data(), n, out_features_);
    ConstMatMap xm(input_.data(), n, in_features_);
    ConstMatMap wm(weight_.data(), out_features_, in_features_);
    MatMap gwm(gweight_.data(), out_features_, in_features_);
    gwm.noalias() += gym.transpose() * xm;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_features_; ++j) gbias_[j] += gy.at(i, j);
    Tensor gx({n, in_features_});
    MatMap gxm(gx.data(), n, in_features_);
    gxm.noalias() = gym * wm;
    return gx;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, double init_std)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(init_weights({out_ch, in_ch * kernel * kernel}, rng, init_std)),
      bias_(Tensor({out_ch})),
      gweight_(Tensor({out_ch, in_ch * kernel * kernel})),
      gbias_(Tensor({out_ch})) {}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != in_ch_) throw ShapeError("conv: bad input shape");
    input_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out_extent(h, kernel_, stride_, pad_);
    const int ow = conv_out_extent(w, kernel_, stride_, pad_);
    if (oh <= 0 || ow <= 0) throw ShapeError("conv: output would be empty");
    const int K = in_ch_ * kernel_ * kernel_;
    const int L = oh * ow;
    cols_.assign(static_cast<std::size_t>(n) * K * L, 0.0);
    Tensor y({n, out_ch_, oh, ow});
    ConstMatMap wm(weight_.data(), out_ch_, K);
    for (int s = 0; s < n; ++s) {
        double* col = cols_.data() + static_cast<std::size_t>(s) * K * L;
        im2col(x.data() + static_cast<std::size_t>(s) * in_ch_ * h * w, in_ch_, h, w, kernel_,
               stride_, pad_, oh, ow, col);
        MatMap ym(y.data() + static_cast<std::size_t>(s) * out_ch_ * L, out_ch_, L);
        ConstMatMap cm(col, K, L);
        ym.noalias() = wm * cm;
        for (int oc = 0; oc < out_ch_; ++oc) ym.row(oc).array() += bias_[oc];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const int oh = gy.dim(2), ow = gy.dim(3);
    const int K = in_ch_ * kernel_ * kernel_;
    const int L = oh * ow;
    Tensor gx({n, in_ch_, h, w});
    ConstMatMap wm(weight_.data(), out_ch_, K);
    MatMap gwm(gweight_.data(), out_ch_, K);
    std::vector<double> gcol(static_cast<std::size_t>(K) * L);
    for (int s = 0; s < n; ++s) {
        ConstMatMap gym(gy.data() + static_cast<std::size_t>(s) * out_ch_ * L, out_ch_, L);
        ConstMatMap cm(cols_.data() + static_cast<std::size_t>(s) * K * L, K, L);
        gwm.noalias() += gym * cm.transpose();
        for (int oc = 0; oc < out_ch_; ++oc) gbias_[oc] += gym.row(oc).sum();
        MatMap gcm(gcol.data(), K, L);
        gcm.noalias() = wm.transpose() * gym;
        col2im(gcol.data(), in_ch_, h, w, kernel_, stride_, pad_, oh, ow,
               gx.data() + static_cast<std::size_t>(s) * in_ch_ * h * w);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
                                 double init_std)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(init_weights({in_ch, out_ch * kernel * kernel}, rng, init_std)),
      bias_(Tensor({out_ch})),
      gweight_(Tensor({in_ch, out_ch * kernel * kernel})),
      gbias_(Tensor({out_ch})) {}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != in_ch_) throw ShapeError("convT: bad input shape");
    input_ = x;
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const int oh = (ih - 1) * stride_ - 2 * pad_ + kernel_;
    const int ow = (iw - 1) * stride_ - 2 * pad_ + kernel_;
    const int K = out_ch_ * kernel_ * kernel_;
    const int L = ih * iw;
    Tensor y({n, out_ch_, oh, ow});
    ConstMatMap wm(weight_.data(), in_ch_, K);
    std::vector<double> col(static_cast<std::size_t>(K) * L);
    for (int s = 0; s < n; ++s) {
        ConstMatMap xm(x.data() + static_cast<std::size_t>(s) * in_ch_ * L, in_ch_, L);
        MatMap cm(col.data(), K, L);
        cm.noalias() = wm.transpose() * xm;
        double* out = y.data() + static_cast<std::size_t>(s) * out_ch_ * oh * ow;
        col2im(col.data(), out_ch_, oh, ow, kernel_, stride_, pad_, ih, iw, out);
        for (int oc = 0; oc < out_ch_; ++oc) {
            double* plane = out + static_cast<std::size_t>(oc) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) plane[i] += bias_[oc];
        }
    }
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
    const int n = input_.dim(0), ih = input_.dim(2), iw = input_.dim(3);
    const int oh = gy.dim(2), ow = gy.dim(3);
    const int K = out_ch_ * kernel_ * kernel_;
    const int L = ih * iw;
    Tensor gx({n, in_ch_, ih, iw});
    ConstMatMap wm(weight_.data(), in_ch_, K);
    MatMap gwm(gweight_.data(), in_ch_, K);
    std::vector<double> gcol(static_cast<std::size_t>(K) * L);
    for (int s = 0; s < n; ++s) {
        const double* gout = gy.data() + static_cast<std::size_t>(s) * out_ch_ * oh * ow;
        im2col(gout, out_ch_, oh, ow, kernel_, stride_, pad_, ih, iw, gcol.data());
        ConstMatMap gcm(gcol.data(), K, L);
        ConstMatMap xm(input_.data() + static_cast<std::size_t>(s) * in_ch_ * L, in_ch_, L);
        gwm.noalias() += xm * gcm.transpose();
        MatMap gxm(gx.data() + static_cast<std::size_t>(s) * in_ch_ * L, in_ch_, L);
        gxm.noalias() = wm * gcm;
        for (int oc = 0; oc < out_ch_; ++oc) {
            const double* plane = gout + static_cast<std::size_t>(oc) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) gbias_[oc] += plane[i];
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Activations and reshape

Tensor LeakyRelu::forward(const Tensor& x) {
    input_ = x;
    Tensor y = x;
    for (int i = 0; i < y.size(); ++i)
        if (y[i] < 0.0) y[i] *= slope_;
    return y;
}

Tensor LeakyRelu::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (int i = 0; i < gx.size(); ++i)
        if (input_[i] < 0.0) gx[i] *= slope_;
    return gx;
}

Tensor Relu::forward(const Tensor& x) {
    input_ = x;
    Tensor y = x;
    for (int i = 0; i < y.size(); ++i)
        if (y[i] < 0.0) y[i] = 0.0;
    return y;
}

Tensor Relu::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (int i = 0; i < gx.size(); ++i)
        if (input_[i] < 0.0) gx[i] = 0.0;
    return gx;
}

Tensor Tanh::forward(const Tensor& x) {
    Tensor y = x;
    for (int i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    output_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (int i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - output_[i] * output_[i];
    return gx;
}

Tensor Reshape::forward(const Tensor& x) {
    input_shape_ = x.shape();
    std::vector<int> shape{x.dim(0)};
    shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
    return x.reshaped(std::move(shape));
}

Tensor Reshape::backward(const Tensor& gy) { return gy.reshaped(input_shape_); }

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(const Sequential& other) { *this = other; }

Sequential& Sequential::operator=(const Sequential& other) {
    if (this == &other) return *this;
    layers_.clear();
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
    activations_ = other.activations_;
    return *this;
}

void Sequential::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Tensor Sequential::forward_to(const Tensor& x, int last) {
    activations_.assign(layers_.size(), Tensor());
    Tensor cur = x;
    for (int i = 0; i <= last; ++i) {
        cur = layers_[static_cast<std::size_t>(i)]->forward(cur);
        activations_[static_cast<std::size_t>(i)] = cur;
    }
    return cur;
}

Tensor Sequential::backward_from(const Tensor& gy, int from) {
    Tensor cur = gy;
    for (int i = from; i >= 0; --i) cur = layers_[static_cast<std::size_t>(i)]->backward(cur);
    return cur;
}

std::vector<Tensor*> Sequential::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Sequential::grads() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* g : l->grads()) out.push_back(g);
    return out;
}

void Sequential::zero_grads() {
    for (Tensor* g : grads()) g->zero();
}

std::uint64_t Sequential::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<Layer&>(*l).params()) {
            h ^= content_hash(*p);
            h *= 0x100000001b3ULL;
        }
    return h;
}

// ---------------------------------------------------------------------------
// Adam

void AdamOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (int j = 0; j < p.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor softmax2(const Tensor& logits) {
    if (logits.rank() != 2 || logits.dim(1) != 2) throw ShapeError("softmax2: expected (N,2)");
    Tensor p = logits;
    for (int i = 0; i < logits.dim(0); ++i) {
        const double a = logits.at(i, 0), b = logits.at(i, 1);
        const double m = a > b ? a : b;
        const double ea = std::exp(a - m), eb = std::exp(b - m);
        p.at(i, 0) = ea / (ea + eb);
        p.at(i, 1) = eb / (ea + eb);
    }
    return p;
}

} // namespace foregan
