#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

// Minimal CPU layers with hand-written backward passes.
//
// Activations use channel-major layout [C][N][H][W]: a convolution is then a
// single GEMM over the whole batch and per-channel statistics are contiguous.

namespace swarmnet::nn {

struct Tensor {
    int c = 0, n = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c_, int n_, int h_, int w_, double fill = 0.0)
        : c(c_), n(n_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * n_ * h_ * w_, fill) {}

    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::size_t row_size() const noexcept { return static_cast<std::size_t>(n) * plane(); }  // one channel
    double* channel(int ci) noexcept { return data.data() + ci * row_size(); }
    const double* channel(int ci) const noexcept { return data.data() + ci * row_size(); }
    double* at(int ci, int ni) noexcept { return channel(ci) + ni * plane(); }
    const double* at(int ci, int ni) const noexcept { return channel(ci) + ni * plane(); }
};

struct Parameter {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = true;  // false for running statistics

    Parameter(std::string n, std::size_t size, bool train = true)
        : name(std::move(n)), value(size, 0.0), grad(train ? size : 0, 0.0), trainable(train) {}
};

enum class Phase { train, inference };

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, Phase phase) = 0;
    // Accumulates parameter gradients and returns the input gradient.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(std::vector<Parameter*>& out) { (void)out; }
};

class Conv2d final : public Layer {
public:
    // Square kernel, stride 1, zero padding kernel/2.
    Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool bias);
    void init_he(std::mt19937_64& rng);

    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    int in_channels() const noexcept { return cin_; }
    int out_channels() const noexcept { return cout_; }

private:
    void im2col(const Tensor& x, std::vector<double>& col) const;
    void col2im(const std::vector<double>& col, Tensor& dx) const;

    int cin_, cout_, k_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

class BatchNorm2d final : public Layer {
public:
    BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);

    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

private:
    int channels_;
    double momentum_, eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Phase phase_ = Phase::inference;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor output_;
};

// 2x2 average pooling, stride 2 (odd trailing row/column dropped).
class AvgPool2 final : public Layer {
public:
    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int in_h_ = 0, in_w_ = 0;
};

// Average over bins of a grid x grid partition; grid == 1 is global pooling.
// Output is [C][N][grid][grid].
class AdaptiveAvgPool final : public Layer {
public:
    explicit AdaptiveAvgPool(int grid) : grid_(grid) {}
    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int grid_;
    int in_h_ = 0, in_w_ = 0;
};

// Fully connected on features flattened from [C][N][H][W] to N x (C*H*W).
// Output is [out][N][1][1].
class Linear final : public Layer {
public:
    Linear(std::string name, int in_features, int out_features);
    void init_xavier(std::mt19937_64& rng);
    void zero();

    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

private:
    int in_, out_;
    Parameter weight_, bias_;
    Tensor input_;
    std::vector<double> flat_;  // N x in, row-major
};

class Sequential final : public Layer {
public:
    Layer& add(std::unique_ptr<Layer> layer);
    template <typename L, typename... Args>
    L& emplace(Args&&... args) {
        auto p = std::make_unique<L>(std::forward<Args>(args)...);
        auto& ref = *p;
        layers_.push_back(std::move(p));
        return ref;
    }

    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// DenseNet block: each layer is BN-ReLU-Conv3x3 producing `growth` channels
// that are concatenated onto its input.
class DenseBlock final : public Layer {
public:
    DenseBlock(const std::string& name, int in_channels, int layers, int growth, double bn_momentum, double bn_eps,
               std::mt19937_64& rng);

    Tensor forward(const Tensor& x, Phase phase) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    int out_channels() const noexcept { return out_channels_; }

private:
    std::vector<Sequential> layers_;
    int in_channels_, growth_, out_channels_;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig config);
    void step();
    void zero_grad();
    long steps() const noexcept { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

std::size_t parameter_count(std::span<Parameter* const> params);

} // namespace swarmnet::nn
