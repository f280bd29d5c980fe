#pragma once

// Dense reference forward pass, independent of the tape and the sparse kernels.

#include "episurr/surrogate/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace episurr::testing {

using DenseMatrix = Eigen::MatrixXd;

inline DenseMatrix dense_normalized(const metapop::BinaryMatrix& a, bool self_loops)
{
    const auto n = static_cast<Eigen::Index>(a.n);
    DenseMatrix m = DenseMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = a(i, j) ? 1.0 : 0.0;
    }
    if (self_loops) m += DenseMatrix::Identity(n, n);
    Eigen::VectorXd d = m.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) d(i) = d(i) > 0 ? 1.0 / std::sqrt(d(i)) : 0.0;
    return d.asDiagonal() * m * d.asDiagonal();
}

inline DenseMatrix dense_activate(const DenseMatrix& x, surrogate::Activation a)
{
    switch (a) {
    case surrogate::Activation::relu:
        return x.cwiseMax(0.0);
    case surrogate::Activation::elu:
        return x.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
    case surrogate::Activation::linear:
        break;
    }
    return x;
}

/// Forward pass of one sample (nodes x input_width) written out layer by layer.
/// `kink_inputs` collects every value fed into a ReLU or ELU; both are non-smooth at zero.
inline DenseMatrix oracle_forward(const surrogate::Network<double>& net, const DenseMatrix& x,
                                  const metapop::BinaryMatrix* adjacency, std::vector<double>* kink_inputs = nullptr)
{
    std::map<std::string, DenseMatrix> p;
    for (const auto* param : net.parameters()) p[param->name] = param->value;
    DenseMatrix a_hat, a_tilde;
    if (adjacency) {
        a_hat = dense_normalized(*adjacency, true);
        a_tilde = dense_normalized(*adjacency, false);
    }
    const auto bias = [](const DenseMatrix& m, const DenseMatrix& b) {
        DenseMatrix out = m;
        out.rowwise() += b.row(0);
        return out;
    };
    const auto activate = [&](const DenseMatrix& m, surrogate::Activation a) {
        if (kink_inputs && a != surrogate::Activation::linear) kink_inputs->insert(kink_inputs->end(), m.data(), m.data() + m.size());
        return dense_activate(m, a);
    };
    DenseMatrix h = x;
    const auto& layers = net.spec().layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string pre = "layer" + std::to_string(i);
        if (l.kind == surrogate::LayerKind::dense) {
            h = activate(bias(h * p.at(pre + ".w"), p.at(pre + ".b")), l.activation);
        }
        else if (l.kind == surrogate::LayerKind::gcn_conv) {
            h = activate(bias(a_hat * h * p.at(pre + ".w"), p.at(pre + ".b")), l.activation);
        }
        else {
            DenseMatrix sum = DenseMatrix::Zero(h.rows(), static_cast<Eigen::Index>(l.channels));
            for (std::size_t k = 0; k < l.stacks; ++k) {
                const std::string sp = pre + ".stack" + std::to_string(k);
                DenseMatrix xt = h;
                for (std::size_t t = 0; t < l.iterations; ++t) {
                    const DenseMatrix& w = t == 0 ? p.at(sp + ".w_in") : p.at(sp + ".w_rec");
                    xt = activate(bias(a_tilde * xt * w + h * p.at(sp + ".v"), p.at(sp + ".b")), l.activation);
                }
                sum += xt;
            }
            h = sum / static_cast<double>(l.stacks);
        }
    }
    return bias(h * p.at("head.w"), p.at("head.b"));
}

} // namespace episurr::testing
