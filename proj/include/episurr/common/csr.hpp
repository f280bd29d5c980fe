#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace episurr {

/// Compressed sparse row matrix.
template <class T>
struct CsrMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> col_idx;
    std::vector<T> values;

    std::size_t nnz() const { return values.size(); }

    /// Row-major dense copy.
    std::vector<T> to_dense() const
    {
        std::vector<T> out(rows * cols, T{0});
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                out[i * cols + col_idx[k]] = values[k];
            }
        }
        return out;
    }

    template <class U>
    CsrMatrix<U> cast() const
    {
        CsrMatrix<U> out;
        out.rows = rows;
        out.cols = cols;
        out.row_ptr = row_ptr;
        out.col_idx = col_idx;
        out.values.assign(values.begin(), values.end());
        return out;
    }
};

} // namespace episurr
