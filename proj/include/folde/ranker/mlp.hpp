#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "folde/error.hpp"
#include "folde/random.hpp"

namespace folde {

struct MlpConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{100, 50};
    double dropout_p = 0.2;
    bool final_bias = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_dim == 0) throw InvariantError("MLP input_dim must be positive");
        if (hidden_dims.empty()) throw InvariantError("MLP needs at least one hidden layer");
        for (auto h : hidden_dims)
            if (h == 0) throw InvariantError("MLP hidden layer sizes must be positive");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw InvariantError("dropout must be in [0, 1)");
    }

    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

// Linear -> BatchNorm -> ReLU -> Dropout per hidden layer, then a linear
// scalar head. All trainable values live in one flat parameter vector; batch
// norm running statistics live in a second one.
template <class T>
class Mlp {
public:
    using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

    static constexpr double kBatchNormEps = 1e-5;
    static constexpr double kBatchNormMomentum = 0.1;

    explicit Mlp(MlpConfig config) : config_(std::move(config)) {
        config_.validate();
        std::size_t in = config_.input_dim;
        std::size_t offset = 0;
        std::size_t running = 0;
        for (std::size_t out : config_.hidden_dims) {
            Layer l;
            l.in = in;
            l.out = out;
            l.weight = offset;
            offset += in * out;
            l.gamma = offset;
            offset += out;
            l.beta = offset;
            offset += out;
            l.run_mean = running;
            running += out;
            l.run_var = running;
            running += out;
            layers_.push_back(l);
            in = out;
        }
        head_ = offset;
        offset += in;
        if (config_.final_bias) {
            head_bias_ = offset;
            offset += 1;
        }
        params_.assign(offset, T(0));
        grad_.assign(offset, T(0));
        running_.assign(running, T(0));
        initialize();
    }

    const MlpConfig& config() const noexcept { return config_; }

    std::span<T> parameters() noexcept { return params_; }
    std::span<const T> parameters() const noexcept { return params_; }
    std::span<T> running_stats() noexcept { return running_; }
    std::span<const T> running_stats() const noexcept { return running_; }
    std::span<const T> gradient() const noexcept { return grad_; }

    // Eval mode: dropout off, batch norm uses running statistics.
    Vector predict(const Matrix& x) const {
        check_input(x);
        Matrix a = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& L = layers_[l];
            Matrix z = a * weight(L).transpose();
            const RowVector mean = running_row(L.run_mean, L.out);
            const RowVector inv_std =
                (running_row(L.run_var, L.out).array() + T(kBatchNormEps)).rsqrt().matrix();
            Matrix y = ((z.rowwise() - mean).array().rowwise() * (inv_std.array() * gamma(L).array()))
                           .rowwise() +
                       beta(L).array();
            a = y.cwiseMax(T(0));
        }
        return head(a);
    }

    // Train mode: batch statistics, dropout drawn from rng, running stats
    // updated. Caches activations for backward().
    Vector forward_train(const Matrix& x, Rng& rng, bool update_running = true) {
        check_input(x);
        const auto n = x.rows();
        cache_.assign(layers_.size(), {});
        Matrix a = x;
        const T keep = T(1.0 - config_.dropout_p);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& L = layers_[l];
            auto& c = cache_[l];
            c.input = std::move(a);
            Matrix z = c.input * weight(L).transpose();
            const RowVector mean = z.colwise().mean();
            z.rowwise() -= mean;
            const RowVector var = z.array().square().colwise().mean().matrix();
            c.inv_std = (var.array() + T(kBatchNormEps)).rsqrt().matrix();
            c.xhat = (z.array().rowwise() * c.inv_std.array()).matrix();
            c.pre_relu = ((c.xhat.array().rowwise() * gamma(L).array()).rowwise() + beta(L).array()).matrix();
            a = c.pre_relu.cwiseMax(T(0));
            if (config_.dropout_p > 0.0) {
                std::bernoulli_distribution bern(1.0 - config_.dropout_p);
                c.mask.resize(n, static_cast<Eigen::Index>(L.out));
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < c.mask.cols(); ++j) c.mask(i, j) = bern(rng) ? T(1) / keep : T(0);
                a = a.cwiseProduct(c.mask);
            } else {
                c.mask.resize(0, 0);
            }
            if (update_running) {
                const T m = T(kBatchNormMomentum);
                const T unbias = n > 1 ? T(double(n) / double(n - 1)) : T(1);
                for (std::size_t j = 0; j < L.out; ++j) {
                    running_[L.run_mean + j] = (T(1) - m) * running_[L.run_mean + j] + m * mean(Eigen::Index(j));
                    running_[L.run_var + j] =
                        (T(1) - m) * running_[L.run_var + j] + m * var(Eigen::Index(j)) * unbias;
                }
            }
        }
        last_hidden_ = a;
        return head(last_hidden_);
    }

    // Gradient of a loss w.r.t. parameters, given dLoss/dScores from the most
    // recent forward_train(). Result is available via gradient().
    void backward(const Vector& dscores) {
        if (cache_.size() != layers_.size() || dscores.size() != last_hidden_.rows())
            throw InvariantError("backward() without matching forward_train()");
        std::fill(grad_.begin(), grad_.end(), T(0));
        const auto n = static_cast<T>(dscores.size());
        const std::size_t h = layers_.back().out;
        Eigen::Map<Vector>(grad_.data() + head_, Eigen::Index(h)) = last_hidden_.transpose() * dscores;
        if (config_.final_bias) grad_[head_bias_] = dscores.sum();
        Matrix da = dscores * head_weight().transpose();
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const auto& L = layers_[l];
            const auto& c = cache_[l];
            Matrix dy = c.mask.size() ? Matrix(da.cwiseProduct(c.mask)) : da;
            dy = (c.pre_relu.array() > T(0)).select(dy, T(0));
            row_grad(L.gamma, L.out) = dy.cwiseProduct(c.xhat).colwise().sum();
            row_grad(L.beta, L.out) = dy.colwise().sum();
            const Matrix dxhat = (dy.array().rowwise() * gamma(L).array()).matrix();
            const RowVector sum_dxhat = dxhat.colwise().sum();
            const RowVector sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum();
            Matrix dz = (dxhat * n).rowwise() - sum_dxhat;
            dz -= (c.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
            dz = (dz.array().rowwise() * (c.inv_std.array() / n)).matrix();
            Eigen::Map<Matrix>(grad_.data() + L.weight, Eigen::Index(L.out), Eigen::Index(L.in)) =
                dz.transpose() * c.input;
            if (l > 0) da = dz * weight(L);
        }
    }

    friend bool operator==(const Mlp& a, const Mlp& b) {
        return a.config_ == b.config_ && a.params_ == b.params_ && a.running_ == b.running_;
    }

private:
    struct Layer {
        std::size_t in = 0, out = 0;
        std::size_t weight = 0, gamma = 0, beta = 0;
        std::size_t run_mean = 0, run_var = 0;
    };

    struct Cache {
        Matrix input, xhat, pre_relu, mask;
        RowVector inv_std;
    };

    void initialize() {
        Rng rng(derive_seed(config_.seed, {tag(Stream::member_init)}));
        for (const auto& L : layers_) {
            const double bound = std::sqrt(6.0 / double(L.in));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t i = 0; i < L.in * L.out; ++i) params_[L.weight + i] = T(u(rng));
            for (std::size_t j = 0; j < L.out; ++j) {
                params_[L.gamma + j] = T(1);
                params_[L.beta + j] = T(0);
                running_[L.run_mean + j] = T(0);
                running_[L.run_var + j] = T(1);
            }
        }
        const std::size_t h = layers_.back().out;
        const double bound = 1.0 / std::sqrt(double(h));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < h; ++i) params_[head_ + i] = T(u(rng));
        if (config_.final_bias) params_[head_bias_] = T(u(rng));
    }

    void check_input(const Matrix& x) const {
        if (static_cast<std::size_t>(x.cols()) != config_.input_dim)
            throw InvariantError("input has " + std::to_string(x.cols()) + " features, model expects " +
                                 std::to_string(config_.input_dim));
        if (x.rows() == 0) throw InvariantError("empty input batch");
    }

    Eigen::Map<const Matrix> weight(const Layer& L) const {
        return {params_.data() + L.weight, Eigen::Index(L.out), Eigen::Index(L.in)};
    }
    Eigen::Map<const RowVector> gamma(const Layer& L) const {
        return {params_.data() + L.gamma, Eigen::Index(L.out)};
    }
    Eigen::Map<const RowVector> beta(const Layer& L) const { return {params_.data() + L.beta, Eigen::Index(L.out)}; }
    Eigen::Map<const RowVector> running_row(std::size_t off, std::size_t n) const {
        return {running_.data() + off, Eigen::Index(n)};
    }
    Eigen::Map<RowVector> row_grad(std::size_t off, std::size_t n) { return {grad_.data() + off, Eigen::Index(n)}; }
    Eigen::Map<const Vector> head_weight() const {
        return {params_.data() + head_, Eigen::Index(layers_.back().out)};
    }

    Vector head(const Matrix& a) const {
        Vector s = a * head_weight();
        if (config_.final_bias) s.array() += params_[head_bias_];
        return s;
    }

    MlpConfig config_;
    std::vector<Layer> layers_;
    std::size_t head_ = 0;
    std::size_t head_bias_ = 0;
    std::vector<T> params_;
    std::vector<T> grad_;
    std::vector<T> running_;
    std::vector<Cache> cache_;
    Matrix last_hidden_;
};

// Adam with L2 weight decay folded into the gradient.
template <class T>
class Adam {
public:
    Adam(std::size_t n, double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(learning_rate), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps), m_(n, T(0)), v_(n, T(0)) {}

    void step(std::span<T> params, std::span<const T> grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) throw InvariantError("Adam size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, double(t_));
        const double c2 = 1.0 - std::pow(b2_, double(t_));
        const T step = T(lr_ / c1);
        const T b1 = T(b1_), b2 = T(b2_), wd = T(wd_), eps = T(eps_);
        const T inv_c2 = T(1.0 / c2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const T g = grad[i] + wd * params[i];
            m_[i] = b1 * m_[i] + (T(1) - b1) * g;
            v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
            params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
        }
    }

private:
    double lr_, wd_, b1_, b2_, eps_;
    std::vector<T> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace folde
