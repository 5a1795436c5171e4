#pragma once

#include <cstdint>
#include <vector>

#include "bssp/error.hpp"

namespace bssp {

// Dense row-major matrix over {0,1}. Used for predictor data.
class BinaryMatrix {
public:
    BinaryMatrix() = default;
    BinaryMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    const std::uint8_t* row(std::size_t r) const { return data_.data() + r * cols_; }

    // Row bit pattern, column j in bit j. Matching and Hamming distances work
    // on these words, which caps supported width at 64 columns.
    std::uint64_t packed_row(std::size_t r) const {
        std::uint64_t p = 0;
        const std::uint8_t* ptr = row(r);
        for (std::size_t j = 0; j < cols_; ++j)
            if (ptr[j]) p |= (std::uint64_t{1} << j);
        return p;
    }

    BinaryMatrix select_rows(const std::vector<std::size_t>& indices) const {
        BinaryMatrix out(indices.size(), cols_);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                out(i, j) = (*this)(indices[i], j);
        return out;
    }

    bool operator==(const BinaryMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

using WeightVector = std::vector<double>;

inline void check_pattern_width(std::size_t cols) {
    if (cols > 64) throw capacity_error("column count " + std::to_string(cols) + " exceeds the 64-bit pattern limit");
}

}  // namespace bssp
