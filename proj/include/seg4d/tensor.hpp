#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace seg4d {

// Dense row-major matrix. Rows are points/voxels/edges, columns are channels.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    const T& operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void resize(std::size_t rows, std::size_t cols, T fill = T(0)) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, fill);
    }

    template <typename U>
    Matrix<U> cast() const {
        Matrix<U> out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.storage()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

// Horizontal concatenation [a, b].
template <typename T>
Matrix<T> hconcat(const Matrix<T>& a, const Matrix<T>& b) {
    assert(a.rows() == b.rows());
    Matrix<T> out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

// Inverse of hconcat for gradients: splits columns [0, left) and [left, cols).
template <typename T>
void hsplit(const Matrix<T>& m, std::size_t left, Matrix<T>& a, Matrix<T>& b) {
    a.resize(m.rows(), left);
    b.resize(m.rows(), m.cols() - left);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto src = m.row(i);
        std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(left), a.row(i).begin());
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(left), src.end(), b.row(i).begin());
    }
}

template <typename T>
void add_inplace(Matrix<T>& dst, const Matrix<T>& src) {
    assert(dst.rows() == src.rows() && dst.cols() == src.cols());
    auto& d = dst.storage();
    const auto& s = src.storage();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace seg4d
