#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fanet/tensor.hpp"

namespace fanet {

// Stepped learning rate: lr0 * factor^floor((epoch-1)/every), epoch 1-based.
inline double scheduled_lr(double lr0, double factor, int every, int epoch) {
    if (every < 1) return lr0;
    return lr0 * std::pow(factor, (epoch - 1) / every);
}

template <typename T>
class Adam {
public:
    Adam() = default;

    explicit Adam(ParamList<T> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(static_cast<std::size_t>(params_[i].tensor.numel()), T(0));
            v_[i].assign(static_cast<std::size_t>(params_[i].tensor.numel()), T(0));
        }
    }

    void step(double lr) {
        if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive, got " + std::to_string(lr));
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto vals = params_[i].tensor.data();
            auto grads = params_[i].tensor.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < vals.size(); ++k) {
                const double g = static_cast<double>(grads[k]);
                const double mk = beta1_ * static_cast<double>(m[k]) + (1.0 - beta1_) * g;
                const double vk = beta2_ * static_cast<double>(v[k]) + (1.0 - beta2_) * g * g;
                m[k] = static_cast<T>(mk);
                v[k] = static_cast<T>(vk);
                vals[k] = static_cast<T>(static_cast<double>(vals[k]) -
                                         lr * (mk / c1) / (std::sqrt(vk / c2) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    const ParamList<T>& params() const { return params_; }
    std::int64_t step_count() const { return t_; }

    // Checkpoint surface: moment buffers plus step counter.
    std::vector<std::vector<T>>& moments1() { return m_; }
    std::vector<std::vector<T>>& moments2() { return v_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    ParamList<T> params_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

}  // namespace fanet
