// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ebf/kernels.hpp"

namespace ebf::kernels::detail {

/// Operand count and dimension checks shared by both implementations.
template <class T>
void check_shapes(const Inputs<T>& in);

std::size_t conv_stride(const Params& p);
std::size_t pool_stride(const Params& p);

/// Keep flag per element, drawn in index order from the mask seed.
std::vector<bool> dropout_mask(std::size_t n, double rate, std::uint64_t seed);

/// Rows and columns of a matrix-like operand; 1-D shapes are one row.
inline std::pair<std::size_t, std::size_t> rows_cols(const std::vector<std::size_t>& shape) {
    if (shape.size() == 1) return {1, shape[0]};
    std::size_t rows = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
    return {rows, shape.back()};
}

}  // namespace ebf::kernels::detail
