// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebf/time.hpp"

namespace ebf::kernels {

/// The fourteen units of computation.
enum class Kernel : std::uint8_t {
    convolution,
    fully_connected,
    relu,
    sigmoid,
    tanh,
    max_pooling,
    avg_pooling,
    cosine_norm,
    batch_norm,
    dropout,
    elementwise_multiply,
    softmax,
    data_arrangement,
    memcpy,
};

inline constexpr std::array kAllKernels = {
    Kernel::convolution, Kernel::fully_connected, Kernel::relu,       Kernel::sigmoid,
    Kernel::tanh,        Kernel::max_pooling,     Kernel::avg_pooling, Kernel::cosine_norm,
    Kernel::batch_norm,  Kernel::dropout,         Kernel::elementwise_multiply,
    Kernel::softmax,     Kernel::data_arrangement, Kernel::memcpy,
};

std::string_view name_of(Kernel k) noexcept;
/// Throws UnknownKernel.
Kernel parse_kernel(std::string_view name);

enum class Precision : std::uint8_t { f32, f64 };

template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
};

struct Params {
    std::size_t window = 2;               // pooling window / unused
    std::optional<std::size_t> stride;    // conv default 1, pooling default window
    double rate = 0.5;                    // dropout
    std::uint64_t seed = 0;               // dropout mask
    double eps = 1e-5;                    // batch_norm, cosine_norm
};

/// Operand layout per kernel (all row-major):
///   convolution        {input H x W, filter K x K}           shape {H, W, K}
///   fully_connected    {x N x IN, weight IN x OUT, bias OUT}  shape {N, IN, OUT}
///   elementwise_multiply {a, b}                               any shape
///   batch_norm         {x N x C, mean C, var C, gamma C, beta C}  shape {N, C}
///   pooling            {x H x W}                              shape {H, W}
///   softmax / cosine_norm / data_arrangement {x rows x cols}  shape {rows, cols}
///   relu, sigmoid, tanh, dropout, memcpy {x}                  any shape
template <class T>
struct Inputs {
    Kernel kernel = Kernel::relu;
    std::vector<Tensor<T>> operands;
    Params params;
};

/// Deterministic pseudo-random operands for `shape`.
template <class T>
Inputs<T> make_inputs(Kernel kernel, std::span<const std::size_t> shape, const Params& params, std::uint64_t seed);

/// Optimized implementation. Throws ShapeMismatch.
template <class T>
Tensor<T> compute(const Inputs<T>& in);

/// Textbook loop implementation used as the correctness oracle.
template <class T>
Tensor<T> reference_oracle(const Inputs<T>& in);

struct KernelSpec {
    Kernel kernel = Kernel::relu;
    std::vector<std::size_t> shape;
    std::size_t reps = 10;
    std::uint64_t seed = 1;
    Params params;
    Precision precision = Precision::f32;
};

struct KernelResult {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t reps = 0;
    std::uint64_t checksum = 0;  // FNV-1a over the output bytes
    Nanos min{}, mean{}, p99{};
    std::uint64_t bytes = 0;     // operands read plus output written
    double flops = 0.0;
};

/// Times `reps` runs after one warm-up.
KernelResult run_kernel(const KernelSpec& spec);

/// A fixed set of representative shapes used by `kernels run` when none is
/// given; each dimension stays within what the oracle can check quickly.
std::vector<std::size_t> default_shape(Kernel k);

}  // namespace ebf::kernels
