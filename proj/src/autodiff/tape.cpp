#include "episurr/autodiff/tape.hpp"

#include "episurr/common/error.hpp"

#include <cmath>

namespace episurr::autodiff {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

} // namespace

template <class T>
Matrix<T> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
    return m;
}

template <class T>
Var Tape<T>::push(Matrix<T> value, std::vector<std::size_t> inputs, std::function<void(Tape&, std::size_t)> back)
{
    spent_ = false;
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const
{
    if (v.id >= nodes_.size()) throw InvalidArgument("variable does not belong to this tape");
    return nodes_[v.id];
}

template <class T>
Matrix<T>& Tape<T>::grad_of(std::size_t id)
{
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
}

template <class T>
const Matrix<T>& Tape<T>::value(Var v) const
{
    return node(v).value;
}

template <class T>
const Matrix<T>& Tape<T>::grad(Var v) const
{
    return node(v).grad;
}

template <class T>
Var Tape<T>::constant(Matrix<T> value)
{
    return push(std::move(value), {}, nullptr);
}

template <class T>
Var Tape<T>::parameter(Parameter<T>& p)
{
    const Var v = push(p.value, {}, nullptr);
    nodes_[v.id].param = &p;
    return v;
}

template <class T>
Var Tape<T>::matmul(Var a, Var b)
{
    const auto& A = node(a).value;
    const auto& B = node(b).value;
    if (A.cols() != B.rows()) {
        throw ShapeError("matmul " + dims(A.rows(), A.cols()) + " by " + dims(B.rows(), B.cols()));
    }
    Matrix<T> out = A * B;
    return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        const auto ia = n.inputs[0];
        const auto ib = n.inputs[1];
        t.grad_of(ia).noalias() += n.grad * t.nodes_[ib].value.transpose();
        t.grad_of(ib).noalias() += t.nodes_[ia].value.transpose() * n.grad;
    });
}

template <class T>
Matrix<T> sp_matmul(const CsrMatrix<T>& a, const Matrix<T>& b, std::size_t blocks)
{
    if (blocks == 0 || static_cast<std::size_t>(b.rows()) != blocks * a.cols) {
        throw ShapeError("sparse product: " + std::to_string(blocks) + " blocks of " +
                         dims(static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols)) + " by " +
                         dims(b.rows(), b.cols()));
    }
    Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(blocks * a.rows), b.cols());
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        const auto in0 = static_cast<Eigen::Index>(blk * a.cols);
        const auto out0 = static_cast<Eigen::Index>(blk * a.rows);
        for (std::size_t r = 0; r < a.rows; ++r) {
            for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
                out.row(out0 + static_cast<Eigen::Index>(r)) += a.values[k] * b.row(in0 + a.col_idx[k]);
            }
        }
    }
    return out;
}

template <class T>
Var Tape<T>::sp_matmul(const CsrMatrix<T>& a, Var b, std::size_t blocks)
{
    Matrix<T> out = autodiff::sp_matmul(a, node(b).value, blocks);
    // The adjacency must outlive the tape.
    const CsrMatrix<T>* ap = &a;
    return push(std::move(out), {b.id}, [ap, blocks](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        auto& gb = t.grad_of(n.inputs[0]);
        const auto& A = *ap;
        for (std::size_t blk = 0; blk < blocks; ++blk) {
            const auto in0 = static_cast<Eigen::Index>(blk * A.cols);
            const auto out0 = static_cast<Eigen::Index>(blk * A.rows);
            for (std::size_t r = 0; r < A.rows; ++r) {
                for (std::size_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
                    gb.row(in0 + A.col_idx[k]) += A.values[k] * n.grad.row(out0 + static_cast<Eigen::Index>(r));
                }
            }
        }
    });
}

template <class T>
Var Tape<T>::add(Var a, Var b)
{
    const auto& A = node(a).value;
    const auto& B = node(b).value;
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
        throw ShapeError("add " + dims(A.rows(), A.cols()) + " and " + dims(B.rows(), B.cols()));
    }
    Matrix<T> out = A + B;
    return push(std::move(out), {a.id, b.id}, [](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        t.grad_of(n.inputs[0]) += n.grad;
        t.grad_of(n.inputs[1]) += n.grad;
    });
}

template <class T>
Var Tape<T>::add_bias(Var a, Var bias)
{
    const auto& A = node(a).value;
    const auto& b = node(bias).value;
    if (b.rows() != 1 || b.cols() != A.cols()) {
        throw ShapeError("bias " + dims(b.rows(), b.cols()) + " for " + dims(A.rows(), A.cols()));
    }
    Matrix<T> out = A.rowwise() + b.row(0);
    return push(std::move(out), {a.id, bias.id}, [](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        t.grad_of(n.inputs[0]) += n.grad;
        t.grad_of(n.inputs[1]) += n.grad.colwise().sum();
    });
}

template <class T>
Var Tape<T>::scale(Var a, T factor)
{
    Matrix<T> out = node(a).value * factor;
    return push(std::move(out), {a.id}, [factor](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        t.grad_of(n.inputs[0]) += factor * n.grad;
    });
}

template <class T>
Var Tape<T>::relu(Var a)
{
    Matrix<T> out = node(a).value.cwiseMax(T(0));
    return push(std::move(out), {a.id}, [](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        const auto& x = t.nodes_[n.inputs[0]].value;
        t.grad_of(n.inputs[0]).array() += (x.array() > T(0)).select(n.grad.array(), T(0));
    });
}

template <class T>
Var Tape<T>::elu(Var a)
{
    const auto& x = node(a).value;
    Matrix<T> out = (x.array() >= T(0)).select(x.array(), x.array().exp() - T(1));
    return push(std::move(out), {a.id}, [](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        const auto& x = t.nodes_[n.inputs[0]].value;
        t.grad_of(n.inputs[0]).array() +=
            (x.array() >= T(0)).select(n.grad.array(), n.grad.array() * (n.value.array() + T(1)));
    });
}

template <class T>
Var Tape<T>::weighted_sum(Var a, const Matrix<T>& weights)
{
    const auto& A = node(a).value;
    if (A.rows() != weights.rows() || A.cols() != weights.cols()) {
        throw ShapeError("weighted_sum " + dims(A.rows(), A.cols()) + " with " + dims(weights.rows(), weights.cols()));
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < A.size(); ++i) s += static_cast<double>(A.data()[i]) * weights.data()[i];
    Matrix<T> out(1, 1);
    out(0, 0) = static_cast<T>(s);
    return push(std::move(out), {a.id}, [weights](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        t.grad_of(n.inputs[0]) += n.grad(0, 0) * weights;
    });
}

template <class T>
Var Tape<T>::mape_loss(Var pred, const Matrix<T>& target)
{
    const auto& P = node(pred).value;
    if (P.rows() != target.rows() || P.cols() != target.cols()) {
        throw ShapeError("mape_loss " + dims(P.rows(), P.cols()) + " against " + dims(target.rows(), target.cols()));
    }
    const auto r = mape(P.data(), target.data(), static_cast<std::size_t>(P.size()));
    if (r.used == 0) throw DomainError("MAPE undefined: every target entry is zero");
    Matrix<T> out(1, 1);
    out(0, 0) = static_cast<T>(r.value);
    const double coeff = 100.0 / static_cast<double>(r.used);
    return push(std::move(out), {pred.id}, [target, coeff](Tape& t, std::size_t id) {
        const auto& n = t.nodes_[id];
        const auto& P = t.nodes_[n.inputs[0]].value;
        auto& g = t.grad_of(n.inputs[0]);
        const double up = static_cast<double>(n.grad(0, 0)) * coeff;
        for (Eigen::Index i = 0; i < P.size(); ++i) {
            const double y = target.data()[i];
            if (std::abs(y) <= kMapeFloor) continue;
            const double d = static_cast<double>(P.data()[i]) - y;
            if (d != 0.0) g.data()[i] += static_cast<T>(up * (d > 0.0 ? 1.0 : -1.0) / std::abs(y));
        }
    });
}

template <class T>
void Tape<T>::backward(Var loss)
{
    const auto& L = node(loss).value;
    if (L.rows() != 1 || L.cols() != 1) throw ShapeError("backward needs a scalar loss");
    if (spent_) throw StaleTapeError("backward() already ran on this recording; record a new forward pass first");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    grad_of(loss.id).setOnes();
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        auto& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        if (n.back) n.back(*this, id);
        if (n.param) n.param->grad += n.grad;
    }
    spent_ = true;
}

template <class T>
void Tape<T>::clear()
{
    nodes_.clear();
    spent_ = false;
}

template <class T>
MapeResult mape(const T* pred, const T* target, std::size_t n)
{
    MapeResult r;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = target[i];
        if (std::abs(y) <= kMapeFloor) {
            ++r.excluded;
            continue;
        }
        sum += std::abs(y - static_cast<double>(pred[i])) / std::abs(y);
        ++r.used;
    }
    r.value = r.used ? 100.0 * sum / static_cast<double>(r.used) : 0.0;
    return r;
}

template class Tape<float>;
template class Tape<double>;
template Matrix<float> glorot_uniform<float>(std::size_t, std::size_t, Rng&);
template Matrix<double> glorot_uniform<double>(std::size_t, std::size_t, Rng&);
template MapeResult mape<float>(const float*, const float*, std::size_t);
template MapeResult mape<double>(const double*, const double*, std::size_t);
template Matrix<float> sp_matmul<float>(const CsrMatrix<float>&, const Matrix<float>&, std::size_t);
template Matrix<double> sp_matmul<double>(const CsrMatrix<double>&, const Matrix<double>&, std::size_t);

} // namespace episurr::autodiff
