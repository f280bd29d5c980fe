#pragma once

#include "episurr/autodiff/tape.hpp"

#include <vector>

namespace episurr::autodiff {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments for a fixed list of parameters.
template <class T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, AdamConfig config = {});

    /// One bias-corrected update from the parameters' current gradients.
    void step();
    void zero_grad();
    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    std::vector<Parameter<T>*> params_;
    std::vector<Matrix<T>> m_;
    std::vector<Matrix<T>> v_;
    AdamConfig config_;
    std::size_t t_ = 0;
};

/// w <- w - lr * g for each parameter.
template <class T>
void sgd_step(const std::vector<Parameter<T>*>& params, T lr);

extern template class Adam<float>;
extern template class Adam<double>;

} // namespace episurr::autodiff
