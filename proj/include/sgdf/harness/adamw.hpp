#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sgdf/ad/params.hpp"

namespace sgdf::harness {

// Adam with decoupled weight decay over a ParamStore. Serial and
// deterministic: update order is parameter registration order.
class AdamW {
public:
    AdamW(ad::ParamStore<float>& params, double beta1, double beta2, double weight_decay,
          double eps = 1e-8)
        : params_(&params), beta1_(beta1), beta2_(beta2), wd_(weight_decay), eps_(eps) {
        m_.reserve(static_cast<std::size_t>(params.size()));
        v_.reserve(static_cast<std::size_t>(params.size()));
        for (int id = 0; id < params.size(); ++id) {
            m_.emplace_back(params.value(id).shape());
            v_.emplace_back(params.value(id).shape());
        }
    }

    // Consumes the gradients accumulated in the store; caller zeroes them.
    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (int id = 0; id < params_->size(); ++id) {
            auto& w = params_->value(id);
            const auto& g = params_->grad(id);
            auto& m = m_[static_cast<std::size_t>(id)];
            auto& v = v_[static_cast<std::size_t>(id)];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g[i];
                const double mi = beta1_ * m[i] + (1.0 - beta1_) * gi;
                const double vi = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                m[i] = static_cast<float>(mi);
                v[i] = static_cast<float>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps_) + wd_ * w[i];
                w[i] = static_cast<float>(w[i] - lr * update);
            }
        }
    }

    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    std::vector<Tensor<float>>& first_moments() { return m_; }
    std::vector<Tensor<float>>& second_moments() { return v_; }

private:
    ad::ParamStore<float>* params_;
    double beta1_, beta2_, wd_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor<float>> m_, v_;
};

}  // namespace sgdf::harness
