// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ebf/kernels.hpp"
#include "support.hpp"

namespace ebf::kernels {
namespace {

using test::code_of;

template <class T>
::testing::AssertionResult close(const Tensor<T>& got, const Tensor<T>& want, double rel = 1e-6) {
    if (got.shape != want.shape) return ::testing::AssertionFailure() << "shape mismatch";
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double a = got.data[i], b = want.data[i];
        if (std::abs(a - b) > rel * std::max(std::abs(a), std::abs(b)) + 1e-12)
            return ::testing::AssertionFailure() << "index " << i << ": " << a << " vs " << b;
    }
    return ::testing::AssertionSuccess();
}

std::vector<std::size_t> random_shape(Kernel k, std::mt19937_64& g) {
    auto r = [&](std::size_t lo, std::size_t hi) { return lo + g() % (hi - lo + 1); };
    switch (k) {
        case Kernel::convolution: {
            const std::size_t kk = r(1, 5);
            return {r(kk, 20), r(kk, 20), kk};
        }
        case Kernel::fully_connected: return {r(1, 8), r(1, 24), r(1, 24)};
        case Kernel::max_pooling:
        case Kernel::avg_pooling: return {r(2, 24), r(2, 24)};
        case Kernel::batch_norm:
        case Kernel::softmax:
        case Kernel::cosine_norm:
        case Kernel::data_arrangement: return {r(1, 16), r(1, 32)};
        default: return {r(1, 8), r(1, 64)};
    }
}

TEST(Kernels, NamesRoundTrip) {
    EXPECT_EQ(kAllKernels.size(), 14u);
    for (auto k : kAllKernels) EXPECT_EQ(parse_kernel(name_of(k)), k);
    EXPECT_EQ(code_of([] { parse_kernel("convolutoin"); }), ErrorCode::UnknownKernel);
}

TEST(Kernels, MatchNumpyOracle) {
    for (const auto& c : test::oracles()["kernels"]) {
        Inputs<double> in;
        in.kernel = parse_kernel(c["name"].get<std::string>());
        const auto shape = c["shape"].get<std::vector<std::size_t>>();
        // rebuild operand shapes from the layout documented on Inputs
        const auto ops = c["operands"];
        std::vector<std::vector<std::size_t>> shapes;
        switch (in.kernel) {
            case Kernel::convolution: shapes = {{shape[0], shape[1]}, {shape[2], shape[2]}}; break;
            case Kernel::fully_connected: shapes = {{shape[0], shape[1]}, {shape[1], shape[2]}, {shape[2]}}; break;
            case Kernel::batch_norm: shapes = {shape, {shape[1]}, {shape[1]}, {shape[1]}, {shape[1]}}; break;
            case Kernel::elementwise_multiply: shapes = {shape, shape}; break;
            default: shapes = {shape};
        }
        ASSERT_EQ(shapes.size(), ops.size()) << c["name"];
        for (std::size_t i = 0; i < ops.size(); ++i) in.operands.push_back({shapes[i], ops[i].get<std::vector<double>>()});
        Tensor<double> want{c["expected_shape"].get<std::vector<std::size_t>>(), c["expected"].get<std::vector<double>>()};
        EXPECT_TRUE(close(compute(in), want, 1e-12)) << c["name"];
        EXPECT_TRUE(close(reference_oracle(in), want, 1e-12)) << c["name"];
    }
}

template <class T>
void random_shapes_agree() {
    std::mt19937_64 g(2024);
    for (auto k : kAllKernels) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto shape = random_shape(k, g);
            Params params;
            params.seed = trial;
            const auto in = make_inputs<T>(k, shape, params, 1000 + trial);
            ASSERT_TRUE(close(compute(in), reference_oracle(in))) << name_of(k) << " trial " << trial;
        }
    }
}

TEST(Kernels, OptimizedMatchesOracleF32) { random_shapes_agree<float>(); }
TEST(Kernels, OptimizedMatchesOracleF64) { random_shapes_agree<double>(); }

TEST(Kernels, SoftmaxRowsSumToOne) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto shape = random_shape(Kernel::softmax, g);
        const auto out = compute(make_inputs<double>(Kernel::softmax, shape, {}, trial));
        for (std::size_t r = 0; r < shape[0]; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < shape[1]; ++c) s += out.data[r * shape[1] + c];
            ASSERT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(Kernels, ActivationRanges) {
    const std::vector<std::size_t> shape{4096};
    for (float v : compute(make_inputs<float>(Kernel::sigmoid, shape, {}, 3)).data) ASSERT_TRUE(v > 0.f && v < 1.f);
    for (float v : compute(make_inputs<float>(Kernel::tanh, shape, {}, 3)).data) ASSERT_TRUE(v > -1.f && v < 1.f);
    for (float v : compute(make_inputs<float>(Kernel::relu, shape, {}, 3)).data) ASSERT_GE(v, 0.f);
}

TEST(Kernels, DropoutIsInverted) {
    Params p;
    p.rate = 0.25;
    p.seed = 9;
    const auto in = make_inputs<double>(Kernel::dropout, std::vector<std::size_t>{20000}, p, 4);
    const auto out = compute(in);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.data[i] == 0.0) continue;
        ++kept;
        ASSERT_NEAR(out.data[i], in.operands[0].data[i] / 0.75, 1e-12);
    }
    EXPECT_NEAR(kept / 20000.0, 0.75, 0.02);
    EXPECT_EQ(compute(in).data, out.data);
}

TEST(Kernels, ConvolutionStride) {
    Params p;
    p.stride = 2;
    const std::vector<std::size_t> shape{9, 9, 3};
    const auto in = make_inputs<double>(Kernel::convolution, shape, p, 1);
    const auto out = compute(in);
    EXPECT_EQ(out.shape, (std::vector<std::size_t>{4, 4}));
    EXPECT_TRUE(close(out, reference_oracle(in)));
}

TEST(Kernels, ShapeMismatch) {
    auto in = make_inputs<float>(Kernel::elementwise_multiply, std::vector<std::size_t>{4, 4}, {}, 1);
    in.operands[1].data.pop_back();
    in.operands[1].shape = {15};
    EXPECT_EQ(code_of([&] { compute(in); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([] { make_inputs<float>(Kernel::convolution, std::vector<std::size_t>{2, 2, 3}, {}, 1); }),
              ErrorCode::ShapeMismatch);
}

TEST(Kernels, RunKernelIsDeterministicInChecksum) {
    KernelSpec spec;
    spec.kernel = Kernel::fully_connected;
    spec.shape = default_shape(spec.kernel);
    spec.reps = 3;
    const auto a = run_kernel(spec), b = run_kernel(spec);
    EXPECT_EQ(a.checksum, b.checksum);
    EXPECT_EQ(a.reps, 3u);
    EXPECT_LE(a.min, a.mean);
    EXPECT_GT(a.flops, 0.0);
    spec.seed = 2;
    EXPECT_NE(run_kernel(spec).checksum, a.checksum);
}

TEST(Kernels, DefaultShapesRun) {
    for (auto k : kAllKernels) {
        KernelSpec spec;
        spec.kernel = k;
        spec.shape = default_shape(k);
        spec.reps = 1;
        EXPECT_NO_THROW(run_kernel(spec)) << name_of(k);
    }
}

}  // namespace
}  // namespace ebf::kernels
