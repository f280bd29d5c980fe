#pragma once

#include "episurr/common/csr.hpp"
#include "episurr/common/random.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace episurr::autodiff {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable matrix living outside any tape. backward() adds into `grad`.
template <class T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;

    Parameter() = default;
    Parameter(std::string n, Matrix<T> v) : name(std::move(n)), value(std::move(v)), grad(Matrix<T>::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Glorot-uniform matrix, U(-a, a) with a = sqrt(6 / (rows + cols)).
template <class T>
Matrix<T> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

/// Handle to a value recorded on a tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode recording of matrix operations. Values are kept until clear().
/// A tape is used by one thread at a time.
template <class T>
class Tape {
public:
    Var constant(Matrix<T> value);
    /// Reads the current parameter value; gradients flow into p.grad.
    Var parameter(Parameter<T>& p);

    Var matmul(Var a, Var b);
    /// blocks stacked copies of A applied to consecutive row blocks of b:
    /// b has blocks * A.cols rows and the result blocks * A.rows rows.
    Var sp_matmul(const CsrMatrix<T>& a, Var b, std::size_t blocks = 1);
    Var add(Var a, Var b);
    /// Adds a 1 x c row to every row of a.
    Var add_bias(Var a, Var bias);
    Var scale(Var a, T factor);
    Var relu(Var a);
    /// x for x >= 0, exp(x) - 1 otherwise.
    Var elu(Var a);
    /// Sum of all entries times `weights` entrywise; a 1 x 1 result.
    Var weighted_sum(Var a, const Matrix<T>& weights);

    /// (100 / n) * sum |y - p| / |y| over the n entries with |y| > kMapeFloor.
    /// Throws DomainError if no entry participates. Accumulates in double.
    Var mape_loss(Var pred, const Matrix<T>& target);

    const Matrix<T>& value(Var v) const;
    /// Gradient of the last backward() with respect to v.
    const Matrix<T>& grad(Var v) const;

    /// Propagates d(loss)/d(.) through the recording. loss must be 1 x 1.
    /// A second call without new recording throws StaleTapeError.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        std::vector<std::size_t> inputs;
        Parameter<T>* param = nullptr;
        std::function<void(Tape&, std::size_t)> back;
    };

    Var push(Matrix<T> value, std::vector<std::size_t> inputs, std::function<void(Tape&, std::size_t)> back);
    const Node& node(Var v) const;
    Matrix<T>& grad_of(std::size_t id);

    std::vector<Node> nodes_;
    bool spent_ = false;
};

inline constexpr double kMapeFloor = 1e-12;

/// Standalone Eq.-style MAPE on plain arrays, for evaluation code. Returns the value
/// and the number of excluded entries.
struct MapeResult {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
};

template <class T>
MapeResult mape(const T* pred, const T* target, std::size_t n);

/// Sparse-dense product without recording, blockwise as in Tape::sp_matmul.
template <class T>
Matrix<T> sp_matmul(const CsrMatrix<T>& a, const Matrix<T>& b, std::size_t blocks = 1);

extern template class Tape<float>;
extern template class Tape<double>;

} // namespace episurr::autodiff
