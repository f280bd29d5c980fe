#include "episurr/autodiff/optim.hpp"

#include "episurr/common/error.hpp"

#include <cmath>

namespace episurr::autodiff {

template <class T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig config) : params_(std::move(params)), config_(config)
{
    for (auto* p : params_) {
        m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
}

template <class T>
void Adam<T>::step()
{
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T step = static_cast<T>(config_.lr / c1);
    const T root_c2 = static_cast<T>(std::sqrt(c2));
    const T eps = static_cast<T>(config_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
            throw ShapeError("gradient of " + p.name + " does not match its value");
        }
        m_[k] = b1 * m_[k] + (T(1) - b1) * p.grad;
        v_[k] = b2 * v_[k] + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
        // lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections folded in.
        p.value.array() -= step * m_[k].array() / (v_[k].array().sqrt() / root_c2 + eps);
    }
}

template <class T>
void Adam<T>::zero_grad()
{
    for (auto* p : params_) p->zero_grad();
}

template <class T>
void sgd_step(const std::vector<Parameter<T>*>& params, T lr)
{
    for (auto* p : params) p->value -= lr * p->grad;
}

template class Adam<float>;
template class Adam<double>;
template void sgd_step<float>(const std::vector<Parameter<float>*>&, float);
template void sgd_step<double>(const std::vector<Parameter<double>*>&, double);

} // namespace episurr::autodiff
