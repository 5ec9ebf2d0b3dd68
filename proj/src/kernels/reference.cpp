// SPDX-License-Identifier: Apache-2.0
// Straight-line loop versions, kept deliberately plain.
#include <cmath>

#include "detail.hpp"
#include "ebf/error.hpp"
#include "ebf/kernels.hpp"

namespace ebf::kernels {

template <class T>
Tensor<T> reference_oracle(const Inputs<T>& in) {
    detail::check_shapes(in);
    const auto& x = in.operands[0];
    Tensor<T> out;
    auto d = [](T v) { return static_cast<double>(v); };

    switch (in.kernel) {
        case Kernel::convolution: {
            const auto& f = in.operands[1];
            const std::size_t h = x.dim(0), w = x.dim(1), k = f.dim(0), s = detail::conv_stride(in.params);
            const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
            out.shape = {oh, ow};
            out.data.assign(oh * ow, T(0));
            for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t c = 0; c < ow; ++c) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < k; ++i)
                        for (std::size_t j = 0; j < k; ++j) acc += d(x.data[(r * s + i) * w + c * s + j]) * d(f.data[i * k + j]);
                    out.data[r * ow + c] = static_cast<T>(acc);
                }
            return out;
        }
        case Kernel::fully_connected: {
            const auto& wt = in.operands[1];
            const auto& b = in.operands[2];
            const std::size_t n = x.dim(0), din = x.dim(1), dout = wt.dim(1);
            out.shape = {n, dout};
            out.data.assign(n * dout, T(0));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t o = 0; o < dout; ++o) {
                    double acc = d(b.data[o]);
                    for (std::size_t i = 0; i < din; ++i) acc += d(x.data[r * din + i]) * d(wt.data[i * dout + o]);
                    out.data[r * dout + o] = static_cast<T>(acc);
                }
            return out;
        }
        case Kernel::max_pooling:
        case Kernel::avg_pooling: {
            const bool take_max = in.kernel == Kernel::max_pooling;
            const std::size_t h = x.dim(0), w = x.dim(1), k = in.params.window, s = detail::pool_stride(in.params);
            const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
            out.shape = {oh, ow};
            out.data.assign(oh * ow, T(0));
            for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t c = 0; c < ow; ++c) {
                    double acc = take_max ? d(x.data[r * s * w + c * s]) : 0.0;
                    for (std::size_t i = 0; i < k; ++i)
                        for (std::size_t j = 0; j < k; ++j) {
                            const double v = d(x.data[(r * s + i) * w + c * s + j]);
                            if (take_max) {
                                if (v > acc) acc = v;
                            } else {
                                acc += v;
                            }
                        }
                    out.data[r * ow + c] = static_cast<T>(take_max ? acc : acc / static_cast<double>(k * k));
                }
            return out;
        }
        default: break;
    }

    out.shape = x.shape;
    out.data.assign(x.size(), T(0));
    const std::size_t n = x.size();
    switch (in.kernel) {
        case Kernel::relu:
            for (std::size_t i = 0; i < n; ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
            break;
        case Kernel::sigmoid:
            for (std::size_t i = 0; i < n; ++i) out.data[i] = static_cast<T>(1.0 / (1.0 + std::exp(-d(x.data[i]))));
            break;
        case Kernel::tanh:
            for (std::size_t i = 0; i < n; ++i) {
                const double e2 = std::exp(2.0 * d(x.data[i]));
                out.data[i] = static_cast<T>((e2 - 1.0) / (e2 + 1.0));
            }
            break;
        case Kernel::elementwise_multiply:
            for (std::size_t i = 0; i < n; ++i) out.data[i] = x.data[i] * in.operands[1].data[i];
            break;
        case Kernel::dropout: {
            const auto keep = detail::dropout_mask(n, in.params.rate, in.params.seed);
            for (std::size_t i = 0; i < n; ++i)
                out.data[i] = keep[i] ? static_cast<T>(d(x.data[i]) / (1.0 - in.params.rate)) : T(0);
            break;
        }
        case Kernel::memcpy:
            for (std::size_t i = 0; i < n; ++i) out.data[i] = x.data[i];
            break;
        case Kernel::batch_norm: {
            const std::size_t c = x.dim(1);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = i % c;
                const double norm = (d(x.data[i]) - d(in.operands[1].data[j])) / std::sqrt(d(in.operands[2].data[j]) + in.params.eps);
                out.data[i] = static_cast<T>(d(in.operands[3].data[j]) * norm + d(in.operands[4].data[j]));
            }
            break;
        }
        case Kernel::softmax:
        case Kernel::cosine_norm: {
            const auto [rows, cols] = detail::rows_cols(x.shape);
            for (std::size_t r = 0; r < rows; ++r) {
                if (in.kernel == Kernel::softmax) {
                    double m = d(x.data[r * cols]);
                    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, d(x.data[r * cols + c]));
                    double sum = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(d(x.data[r * cols + c]) - m);
                    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] = static_cast<T>(std::exp(d(x.data[r * cols + c]) - m) / sum);
                } else {
                    double sq = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) sq += d(x.data[r * cols + c]) * d(x.data[r * cols + c]);
                    const double norm = std::sqrt(sq) + in.params.eps;
                    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] = static_cast<T>(d(x.data[r * cols + c]) / norm);
                }
            }
            break;
        }
        case Kernel::data_arrangement: {
            const std::size_t rows = x.dim(0), cols = x.dim(1);
            out.shape = {cols, rows};
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) out.data[c * rows + r] = x.data[r * cols + c];
            break;
        }
        default: throw Error(ErrorCode::UnknownKernel, "unhandled kernel");
    }
    return out;
}

template Tensor<float> reference_oracle<float>(const Inputs<float>&);
template Tensor<double> reference_oracle<double>(const Inputs<double>&);

}  // namespace ebf::kernels
