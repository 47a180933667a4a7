#include "swarmnet/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "swarmnet/errors.hpp"

namespace swarmnet::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void check_channels(const Tensor& x, int expected, const std::string& who) {
    if (x.c != expected)
        throw ShapeError(who + ": expected " + std::to_string(expected) + " channels, got " + std::to_string(x.c));
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool bias)
    : cin_(in_channels), cout_(out_channels), k_(kernel), has_bias_(bias),
      weight_(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(name + ".bias", bias ? out_channels : 0) {
    if (kernel % 2 != 1) throw ShapeError("Conv2d: kernel size must be odd");
}

void Conv2d::init_he(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / (cin_ * k_ * k_)));
    for (auto& w : weight_.value) w = g(rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void Conv2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
}

void Conv2d::im2col(const Tensor& x, std::vector<double>& col) const {
    const int pad = k_ / 2;
    const std::size_t cols = x.row_size();
    col.assign(static_cast<std::size_t>(cin_) * k_ * k_ * cols, 0.0);
    for (int ci = 0; ci < cin_; ++ci)
        for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
                double* dst = col.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
                const int ox = kx - pad, oy = ky - pad;
                const int x_lo = std::max(0, -ox), x_hi = std::min(x.w, x.w - ox);
                for (int ni = 0; ni < x.n; ++ni) {
                    const double* src = x.at(ci, ni);
                    double* d = dst + ni * x.plane();
                    for (int y = std::max(0, -oy); y < std::min(x.h, x.h - oy); ++y) {
                        const double* s = src + static_cast<std::size_t>(y + oy) * x.w + ox;
                        double* r = d + static_cast<std::size_t>(y) * x.w;
                        for (int xx = x_lo; xx < x_hi; ++xx) r[xx] = s[xx];
                    }
                }
            }
}

void Conv2d::col2im(const std::vector<double>& col, Tensor& dx) const {
    const int pad = k_ / 2;
    const std::size_t cols = dx.row_size();
    for (int ci = 0; ci < cin_; ++ci)
        for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
                const double* src = col.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
                const int ox = kx - pad, oy = ky - pad;
                const int x_lo = std::max(0, -ox), x_hi = std::min(dx.w, dx.w - ox);
                for (int ni = 0; ni < dx.n; ++ni) {
                    double* dst = dx.at(ci, ni);
                    const double* s = src + ni * dx.plane();
                    for (int y = std::max(0, -oy); y < std::min(dx.h, dx.h - oy); ++y) {
                        double* d = dst + static_cast<std::size_t>(y + oy) * dx.w + ox;
                        const double* r = s + static_cast<std::size_t>(y) * dx.w;
                        for (int xx = x_lo; xx < x_hi; ++xx) d[xx] += r[xx];
                    }
                }
            }
}

Tensor Conv2d::forward(const Tensor& x, Phase) {
    check_channels(x, cin_, weight_.name);
    input_ = x;
    const auto cols = static_cast<Eigen::Index>(x.row_size());
    const auto kdim = static_cast<Eigen::Index>(cin_) * k_ * k_;
    Tensor y(cout_, x.n, x.h, x.w);
    CMapR w(weight_.value.data(), cout_, kdim);
    MapR out(y.data.data(), cout_, cols);
    if (k_ == 1) {
        out.noalias() = w * CMapR(x.data.data(), kdim, cols);
    } else {
        std::vector<double> col;
        im2col(x, col);
        out.noalias() = w * CMapR(col.data(), kdim, cols);
    }
    if (has_bias_)
        for (int co = 0; co < cout_; ++co) out.row(co).array() += bias_.value[co];
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& x = input_;
    const auto cols = static_cast<Eigen::Index>(x.row_size());
    const auto kdim = static_cast<Eigen::Index>(cin_) * k_ * k_;
    CMapR dy(grad_out.data.data(), cout_, cols);
    CMapR w(weight_.value.data(), cout_, kdim);
    MapR dw(weight_.grad.data(), cout_, kdim);
    if (has_bias_)
        for (int co = 0; co < cout_; ++co) bias_.grad[co] += dy.row(co).sum();

    Tensor dx(cin_, x.n, x.h, x.w);
    if (k_ == 1) {
        CMapR xin(x.data.data(), kdim, cols);
        dw.noalias() += dy * xin.transpose();
        MapR(dx.data.data(), kdim, cols).noalias() = w.transpose() * dy;
    } else {
        std::vector<double> col;
        im2col(x, col);
        dw.noalias() += dy * CMapR(col.data(), kdim, cols).transpose();
        MapR(col.data(), kdim, cols).noalias() = w.transpose() * dy;
        col2im(col, dx);
    }
    return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_(name + ".gamma", channels),
      beta_(name + ".beta", channels), running_mean_(name + ".running_mean", channels, false),
      running_var_(name + ".running_var", channels, false) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
    std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0);
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

Tensor BatchNorm2d::forward(const Tensor& x, Phase phase) {
    check_channels(x, channels_, gamma_.name);
    phase_ = phase;
    const std::size_t m = x.row_size();
    Tensor y(x.c, x.n, x.h, x.w);
    xhat_ = Tensor(x.c, x.n, x.h, x.w);
    inv_std_.assign(channels_, 0.0);
    for (int c = 0; c < channels_; ++c) {
        const double* in = x.channel(c);
        double mean, var;
        if (phase == Phase::train) {
            mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += in[i];
            mean /= static_cast<double>(m);
            var = 0.0;
            for (std::size_t i = 0; i < m; ++i) var += (in[i] - mean) * (in[i] - mean);
            var /= static_cast<double>(m);
            const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
            running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean;
            running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_.value[c];
            var = running_var_.value[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        double* xh = xhat_.channel(c);
        double* out = y.channel(c);
        const double g = gamma_.value[c], b = beta_.value[c];
        for (std::size_t i = 0; i < m; ++i) {
            xh[i] = (in[i] - mean) * inv;
            out[i] = g * xh[i] + b;
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const std::size_t m = grad_out.row_size();
    Tensor dx(grad_out.c, grad_out.n, grad_out.h, grad_out.w);
    for (int c = 0; c < channels_; ++c) {
        const double* dy = grad_out.channel(c);
        const double* xh = xhat_.channel(c);
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sum_dy += dy[i];
            sum_dy_xh += dy[i] * xh[i];
        }
        gamma_.grad[c] += sum_dy_xh;
        beta_.grad[c] += sum_dy;
        const double g = gamma_.value[c];
        double* out = dx.channel(c);
        if (phase_ == Phase::train) {
            const double scale = g * inv_std_[c] / static_cast<double>(m);
            const double md = static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) out[i] = scale * (md * dy[i] - sum_dy - xh[i] * sum_dy_xh);
        } else {
            const double scale = g * inv_std_[c];
            for (std::size_t i = 0; i < m; ++i) out[i] = scale * dy[i];
        }
    }
    return dx;
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, Phase) {
    output_ = x;
    for (auto& v : output_.data) v = v > 0.0 ? v : 0.0;
    return output_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    Tensor dx = grad_out;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (!(output_.data[i] > 0.0)) dx.data[i] = 0.0;
    return dx;
}

// -------------------------------------------------------------- AvgPool2

Tensor AvgPool2::forward(const Tensor& x, Phase) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor y(x.c, x.n, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c)
        for (int ni = 0; ni < x.n; ++ni) {
            const double* s = x.at(c, ni);
            double* d = y.at(c, ni);
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) {
                    const double* p = s + static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
                    d[yy * y.w + xx] = 0.25 * (p[0] + p[1] + p[x.w] + p[x.w + 1]);
                }
        }
    return y;
}

Tensor AvgPool2::backward(const Tensor& g) {
    Tensor dx(g.c, g.n, in_h_, in_w_);
    for (int c = 0; c < g.c; ++c)
        for (int ni = 0; ni < g.n; ++ni) {
            const double* s = g.at(c, ni);
            double* d = dx.at(c, ni);
            for (int yy = 0; yy < g.h; ++yy)
                for (int xx = 0; xx < g.w; ++xx) {
                    const double v = 0.25 * s[yy * g.w + xx];
                    double* p = d + static_cast<std::size_t>(2 * yy) * in_w_ + 2 * xx;
                    p[0] += v;
                    p[1] += v;
                    p[in_w_] += v;
                    p[in_w_ + 1] += v;
                }
        }
    return dx;
}

// ------------------------------------------------------- AdaptiveAvgPool

namespace {
int bin_lo(int i, int size, int grid) { return (i * size) / grid; }
int bin_hi(int i, int size, int grid) { return ((i + 1) * size + grid - 1) / grid; }
} // namespace

Tensor AdaptiveAvgPool::forward(const Tensor& x, Phase) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor y(x.c, x.n, grid_, grid_);
    for (int c = 0; c < x.c; ++c)
        for (int ni = 0; ni < x.n; ++ni) {
            const double* s = x.at(c, ni);
            double* d = y.at(c, ni);
            for (int by = 0; by < grid_; ++by)
                for (int bx = 0; bx < grid_; ++bx) {
                    const int y0 = bin_lo(by, x.h, grid_), y1 = bin_hi(by, x.h, grid_);
                    const int x0 = bin_lo(bx, x.w, grid_), x1 = bin_hi(bx, x.w, grid_);
                    double acc = 0.0;
                    for (int yy = y0; yy < y1; ++yy)
                        for (int xx = x0; xx < x1; ++xx) acc += s[yy * x.w + xx];
                    d[by * grid_ + bx] = acc / ((y1 - y0) * (x1 - x0));
                }
        }
    return y;
}

Tensor AdaptiveAvgPool::backward(const Tensor& g) {
    Tensor dx(g.c, g.n, in_h_, in_w_);
    for (int c = 0; c < g.c; ++c)
        for (int ni = 0; ni < g.n; ++ni) {
            const double* s = g.at(c, ni);
            double* d = dx.at(c, ni);
            for (int by = 0; by < grid_; ++by)
                for (int bx = 0; bx < grid_; ++bx) {
                    const int y0 = bin_lo(by, in_h_, grid_), y1 = bin_hi(by, in_h_, grid_);
                    const int x0 = bin_lo(bx, in_w_, grid_), x1 = bin_hi(bx, in_w_, grid_);
                    const double v = s[by * grid_ + bx] / ((y1 - y0) * (x1 - x0));
                    for (int yy = y0; yy < y1; ++yy)
                        for (int xx = x0; xx < x1; ++xx) d[yy * in_w_ + xx] += v;
                }
        }
    return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_features, int out_features)
    : in_(in_features), out_(out_features), weight_(name + ".weight", static_cast<std::size_t>(in_features) * out_features),
      bias_(name + ".bias", out_features) {}

void Linear::init_xavier(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / (in_ + out_)));
    for (auto& w : weight_.value) w = g(rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void Linear::zero() {
    std::fill(weight_.value.begin(), weight_.value.end(), 0.0);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

Tensor Linear::forward(const Tensor& x, Phase) {
    const std::size_t features = static_cast<std::size_t>(x.c) * x.plane();
    if (features != static_cast<std::size_t>(in_))
        throw ShapeError(weight_.name + ": expected " + std::to_string(in_) + " features, got " + std::to_string(features));
    input_ = x;
    flat_.assign(static_cast<std::size_t>(x.n) * in_, 0.0);
    for (int c = 0; c < x.c; ++c)
        for (int ni = 0; ni < x.n; ++ni) {
            const double* s = x.at(c, ni);
            std::copy(s, s + x.plane(), flat_.data() + static_cast<std::size_t>(ni) * in_ + c * x.plane());
        }
    Tensor y(out_, x.n, 1, 1);
    CMapR w(weight_.value.data(), out_, in_);
    CMapR f(flat_.data(), x.n, in_);
    MapR out(y.data.data(), out_, x.n);
    out.noalias() = w * f.transpose();
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
    return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int n = grad_out.n;
    CMapR dy(grad_out.data.data(), out_, n);
    CMapR f(flat_.data(), n, in_);
    CMapR w(weight_.value.data(), out_, in_);
    MapR(weight_.grad.data(), out_, in_).noalias() += dy * f;
    for (int o = 0; o < out_; ++o) bias_.grad[o] += dy.row(o).sum();
    MatR dflat = dy.transpose() * w;  // n x in
    Tensor dx(input_.c, input_.n, input_.h, input_.w);
    for (int c = 0; c < dx.c; ++c)
        for (int ni = 0; ni < n; ++ni) {
            const double* s = dflat.data() + static_cast<std::size_t>(ni) * in_ + c * dx.plane();
            std::copy(s, s + dx.plane(), dx.at(c, ni));
        }
    return dx;
}

// ------------------------------------------------------------ Sequential

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *layers_.back();
}

Tensor Sequential::forward(const Tensor& x, Phase phase) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, phase);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect(std::vector<Parameter*>& out) {
    for (auto& l : layers_) l->collect(out);
}

// ------------------------------------------------------------ DenseBlock

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw ShapeError("concat_channels: spatial/batch mismatch");
    Tensor out(a.c + b.c, a.n, a.h, a.w);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

DenseBlock::DenseBlock(const std::string& name, int in_channels, int layers, int growth, double bn_momentum,
                       double bn_eps, std::mt19937_64& rng)
    : in_channels_(in_channels), growth_(growth), out_channels_(in_channels + layers * growth) {
    layers_.reserve(layers);
    for (int l = 0; l < layers; ++l) {
        const int cin = in_channels + l * growth;
        const std::string prefix = name + ".layer" + std::to_string(l);
        Sequential seq;
        seq.emplace<BatchNorm2d>(prefix + ".bn", cin, bn_momentum, bn_eps);
        seq.emplace<ReLU>();
        seq.emplace<Conv2d>(prefix + ".conv", cin, growth, 3, false).init_he(rng);
        layers_.push_back(std::move(seq));
    }
}

Tensor DenseBlock::forward(const Tensor& x, Phase phase) {
    check_channels(x, in_channels_, "DenseBlock");
    Tensor features = x;
    for (auto& l : layers_) features = concat_channels(features, l.forward(features, phase));
    return features;
}

Tensor DenseBlock::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        const int cin = in_channels_ + l * growth_;
        const std::size_t split = static_cast<std::size_t>(cin) * g.row_size();
        Tensor g_new(growth_, g.n, g.h, g.w);
        std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(split), g.data.end(), g_new.data.begin());
        Tensor g_in = layers_[l].backward(g_new);
        g.c = cin;
        g.data.resize(split);
        for (std::size_t i = 0; i < split; ++i) g.data[i] += g_in.data[i];
    }
    return g;
}

void DenseBlock::collect(std::vector<Parameter*>& out) {
    for (auto& l : layers_) l.collect(out);
}

// ------------------------------------------------------------------ Adam

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : config_(config) {
    for (auto* p : params)
        if (p->trainable) params_.push_back(p);
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            p.value[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        }
    }
}

std::size_t parameter_count(std::span<Parameter* const> params) {
    std::size_t n = 0;
    for (const auto* p : params)
        if (p->trainable) n += p->value.size();
    return n;
}

} // namespace swarmnet::nn
