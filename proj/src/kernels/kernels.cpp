// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "detail.hpp"
#include "ebf/analytics.hpp"
#include "ebf/error.hpp"
#include "ebf/kernels.hpp"
#include "ebf/rng.hpp"

namespace ebf::kernels {

std::string_view name_of(Kernel k) noexcept {
    switch (k) {
        case Kernel::convolution: return "convolution";
        case Kernel::fully_connected: return "fully_connected";
        case Kernel::relu: return "relu";
        case Kernel::sigmoid: return "sigmoid";
        case Kernel::tanh: return "tanh";
        case Kernel::max_pooling: return "max_pooling";
        case Kernel::avg_pooling: return "avg_pooling";
        case Kernel::cosine_norm: return "cosine_norm";
        case Kernel::batch_norm: return "batch_norm";
        case Kernel::dropout: return "dropout";
        case Kernel::elementwise_multiply: return "elementwise_multiply";
        case Kernel::softmax: return "softmax";
        case Kernel::data_arrangement: return "data_arrangement";
        case Kernel::memcpy: return "memcpy";
    }
    return "unknown";
}

Kernel parse_kernel(std::string_view name) {
    for (Kernel k : kAllKernels)
        if (name_of(k) == name) return k;
    throw Error(ErrorCode::UnknownKernel, "'" + std::string(name) + "'");
}

std::vector<std::size_t> default_shape(Kernel k) {
    switch (k) {
        case Kernel::convolution: return {32, 32, 3};
        case Kernel::fully_connected: return {16, 32, 32};
        case Kernel::max_pooling:
        case Kernel::avg_pooling: return {32, 32};
        case Kernel::batch_norm: return {32, 16};
        case Kernel::cosine_norm:
        case Kernel::softmax:
        case Kernel::data_arrangement: return {32, 32};
        default: return {1024};
    }
}

namespace detail {

std::size_t conv_stride(const Params& p) { return p.stride.value_or(1); }
std::size_t pool_stride(const Params& p) { return p.stride.value_or(p.window); }

std::vector<bool> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<bool> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = rng.uniform() >= rate;
    return keep;
}

template <class T>
void check_shapes(const Inputs<T>& in) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::ShapeMismatch, std::string(name_of(in.kernel)) + ": " + why);
    };
    auto need_operands = [&](std::size_t n) {
        if (in.operands.size() != n) fail("expected " + std::to_string(n) + " operands, got " + std::to_string(in.operands.size()));
        for (const auto& t : in.operands) {
            if (t.shape.empty()) fail("operand without shape");
            std::size_t prod = 1;
            for (std::size_t d : t.shape) {
                if (d < 1) fail("dimensions must be >= 1");
                prod *= d;
            }
            if (prod != t.data.size()) fail("operand data does not match its shape");
        }
    };
    auto need_rank = [&](const Tensor<T>& t, std::size_t r) {
        if (t.shape.size() != r) fail("expected a rank-" + std::to_string(r) + " operand");
    };
    switch (in.kernel) {
        case Kernel::convolution: {
            need_operands(2);
            need_rank(in.operands[0], 2);
            need_rank(in.operands[1], 2);
            const auto& f = in.operands[1].shape;
            if (f[0] != f[1]) fail("filter must be square");
            if (f[0] > in.operands[0].shape[0] || f[0] > in.operands[0].shape[1]) fail("filter larger than input");
            if (conv_stride(in.params) < 1) fail("stride must be >= 1");
            break;
        }
        case Kernel::fully_connected: {
            need_operands(3);
            need_rank(in.operands[0], 2);
            need_rank(in.operands[1], 2);
            need_rank(in.operands[2], 1);
            if (in.operands[0].shape[1] != in.operands[1].shape[0]) fail("input width != weight rows");
            if (in.operands[1].shape[1] != in.operands[2].shape[0]) fail("bias length != weight columns");
            break;
        }
        case Kernel::elementwise_multiply:
            need_operands(2);
            if (in.operands[0].shape != in.operands[1].shape) fail("operand shapes differ");
            break;
        case Kernel::batch_norm: {
            need_operands(5);
            need_rank(in.operands[0], 2);
            const std::size_t c = in.operands[0].shape[1];
            for (std::size_t i = 1; i < 5; ++i)
                if (in.operands[i].shape != std::vector<std::size_t>{c}) fail("statistics must have one entry per channel");
            break;
        }
        case Kernel::max_pooling:
        case Kernel::avg_pooling: {
            need_operands(1);
            need_rank(in.operands[0], 2);
            const std::size_t w = in.params.window;
            if (w < 1 || pool_stride(in.params) < 1) fail("window and stride must be >= 1");
            if (w > in.operands[0].shape[0] || w > in.operands[0].shape[1]) fail("window larger than input");
            break;
        }
        case Kernel::data_arrangement:
            need_operands(1);
            need_rank(in.operands[0], 2);
            break;
        case Kernel::dropout:
            need_operands(1);
            if (!(in.params.rate >= 0.0 && in.params.rate < 1.0)) fail("dropout rate must lie in [0, 1)");
            break;
        default: need_operands(1); break;
    }
}

template void check_shapes<float>(const Inputs<float>&);
template void check_shapes<double>(const Inputs<double>&);

}  // namespace detail

// --- operand generation ----------------------------------------------------

template <class T>
Inputs<T> make_inputs(Kernel kernel, std::span<const std::size_t> shape, const Params& params, std::uint64_t seed) {
    Rng rng = Rng(seed).substream(name_of(kernel));
    auto tensor = [&](std::vector<std::size_t> s, double lo, double hi) {
        Tensor<T> t;
        t.shape = std::move(s);
        std::size_t n = 1;
        for (std::size_t d : t.shape) n *= d;
        t.data.resize(n);
        for (auto& v : t.data) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
        return t;
    };
    auto need = [&](std::size_t n) {
        if (shape.size() != n)
            throw Error(ErrorCode::ShapeMismatch, std::string(name_of(kernel)) + " expects a " + std::to_string(n) + "-d shape");
    };
    const std::vector<std::size_t> dims(shape.begin(), shape.end());
    if (dims.empty()) throw Error(ErrorCode::ShapeMismatch, std::string(name_of(kernel)) + ": empty shape");

    Inputs<T> in;
    in.kernel = kernel;
    in.params = params;
    switch (kernel) {
        case Kernel::convolution:
            need(3);
            in.operands.push_back(tensor({dims[0], dims[1]}, -1, 1));
            in.operands.push_back(tensor({dims[2], dims[2]}, -1, 1));
            break;
        case Kernel::fully_connected:
            need(3);
            in.operands.push_back(tensor({dims[0], dims[1]}, -1, 1));
            in.operands.push_back(tensor({dims[1], dims[2]}, -1, 1));
            in.operands.push_back(tensor({dims[2]}, -1, 1));
            break;
        case Kernel::batch_norm:
            need(2);
            in.operands.push_back(tensor(dims, -2, 2));
            in.operands.push_back(tensor({dims[1]}, -0.5, 0.5));
            in.operands.push_back(tensor({dims[1]}, 0.5, 2.0));
            in.operands.push_back(tensor({dims[1]}, 0.5, 1.5));
            in.operands.push_back(tensor({dims[1]}, -0.5, 0.5));
            break;
        case Kernel::max_pooling:
        case Kernel::avg_pooling:
        case Kernel::data_arrangement:
            need(2);
            in.operands.push_back(tensor(dims, -1, 1));
            break;
        case Kernel::elementwise_multiply:
            in.operands.push_back(tensor(dims, -1, 1));
            in.operands.push_back(tensor(dims, -1, 1));
            break;
        case Kernel::sigmoid:
        case Kernel::tanh:
        case Kernel::softmax: in.operands.push_back(tensor(dims, -8, 8)); break;
        default: in.operands.push_back(tensor(dims, -1, 1)); break;
    }
    detail::check_shapes(in);
    return in;
}

// --- optimized implementations --------------------------------------------

namespace {

template <class T>
Tensor<T> like(std::vector<std::size_t> shape) {
    Tensor<T> t;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    t.shape = std::move(shape);
    t.data.resize(n);
    return t;
}

/// im2col followed by a patch-matrix times filter-vector product.
template <class T>
Tensor<T> convolution(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const auto& f = in.operands[1];
    const std::size_t h = x.dim(0), w = x.dim(1), k = f.dim(0), s = detail::conv_stride(in.params);
    const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1, kk = k * k;
    std::vector<T> cols(oh * ow * kk);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            T* dst = cols.data() + (r * ow + c) * kk;
            for (std::size_t i = 0; i < k; ++i) {
                const T* src = x.data.data() + (r * s + i) * w + c * s;
                std::copy(src, src + k, dst + i * k);
            }
        }
    auto out = like<T>({oh, ow});
    for (std::size_t p = 0; p < oh * ow; ++p) {
        const T* row = cols.data() + p * kk;
        double acc = 0.0;
        for (std::size_t j = 0; j < kk; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(f.data[j]);
        out.data[p] = static_cast<T>(acc);
    }
    return out;
}

/// Row-broadcast accumulation (i-k-j order) so the weight matrix streams.
template <class T>
Tensor<T> fully_connected(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const auto& wt = in.operands[1];
    const auto& b = in.operands[2];
    const std::size_t n = x.dim(0), din = x.dim(1), dout = wt.dim(1);
    auto out = like<T>({n, dout});
    std::vector<double> acc(dout);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < dout; ++o) acc[o] = static_cast<double>(b.data[o]);
        for (std::size_t i = 0; i < din; ++i) {
            const double xi = static_cast<double>(x.data[r * din + i]);
            const T* wrow = wt.data.data() + i * dout;
            for (std::size_t o = 0; o < dout; ++o) acc[o] += xi * static_cast<double>(wrow[o]);
        }
        for (std::size_t o = 0; o < dout; ++o) out.data[r * dout + o] = static_cast<T>(acc[o]);
    }
    return out;
}

/// Column reduction over the window rows first, then a sliding pass.
template <class T>
Tensor<T> pooling(const Inputs<T>& in, bool take_max) {
    const auto& x = in.operands[0];
    const std::size_t h = x.dim(0), w = x.dim(1), k = in.params.window, s = detail::pool_stride(in.params);
    const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
    auto out = like<T>({oh, ow});
    std::vector<double> col(w);
    for (std::size_t r = 0; r < oh; ++r) {
        const T* base = x.data.data() + r * s * w;
        for (std::size_t c = 0; c < w; ++c) col[c] = static_cast<double>(base[c]);
        for (std::size_t i = 1; i < k; ++i) {
            const T* row = base + i * w;
            for (std::size_t c = 0; c < w; ++c)
                col[c] = take_max ? std::max(col[c], static_cast<double>(row[c])) : col[c] + static_cast<double>(row[c]);
        }
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = col[c * s];
            for (std::size_t j = 1; j < k; ++j) acc = take_max ? std::max(acc, col[c * s + j]) : acc + col[c * s + j];
            out.data[r * ow + c] = static_cast<T>(take_max ? acc : acc / static_cast<double>(k * k));
        }
    }
    return out;
}

template <class T>
Tensor<T> softmax(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const auto [rows, cols] = detail::rows_cols(x.shape);
    auto out = like<T>(x.shape);
    std::vector<double> e(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data.data() + r * cols;
        const double m = static_cast<double>(*std::max_element(xr, xr + cols));
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += (e[c] = std::exp(static_cast<double>(xr[c]) - m));
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] = static_cast<T>(e[c] * inv);
    }
    return out;
}

template <class T>
Tensor<T> cosine_norm(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const auto [rows, cols] = detail::rows_cols(x.shape);
    auto out = like<T>(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data.data() + r * cols;
        const double sq = std::inner_product(xr, xr + cols, xr, 0.0, std::plus<>(),
                                             [](T a, T b) { return static_cast<double>(a) * static_cast<double>(b); });
        const double inv = 1.0 / (std::sqrt(sq) + in.params.eps);
        for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] = static_cast<T>(static_cast<double>(xr[c]) * inv);
    }
    return out;
}

/// Folds the statistics into one scale and shift per channel.
template <class T>
Tensor<T> batch_norm(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const std::size_t n = x.dim(0), c = x.dim(1);
    std::vector<double> scale(c), shift(c);
    for (std::size_t j = 0; j < c; ++j) {
        scale[j] = static_cast<double>(in.operands[3].data[j]) /
                   std::sqrt(static_cast<double>(in.operands[2].data[j]) + in.params.eps);
        shift[j] = static_cast<double>(in.operands[4].data[j]) - static_cast<double>(in.operands[1].data[j]) * scale[j];
    }
    auto out = like<T>(x.shape);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out.data[i * c + j] = static_cast<T>(static_cast<double>(x.data[i * c + j]) * scale[j] + shift[j]);
    return out;
}

/// Cache-blocked transpose.
template <class T>
Tensor<T> transpose(const Inputs<T>& in) {
    const auto& x = in.operands[0];
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    constexpr std::size_t B = 16;
    auto out = like<T>({cols, rows});
    for (std::size_t rb = 0; rb < rows; rb += B)
        for (std::size_t cb = 0; cb < cols; cb += B)
            for (std::size_t r = rb; r < std::min(rb + B, rows); ++r)
                for (std::size_t c = cb; c < std::min(cb + B, cols); ++c) out.data[c * rows + r] = x.data[r * cols + c];
    return out;
}

template <class T, class F>
Tensor<T> map(const Tensor<T>& x, F f) {
    Tensor<T> out;
    out.shape = x.shape;
    out.data.resize(x.size());
    std::transform(x.data.begin(), x.data.end(), out.data.begin(), f);
    return out;
}

}  // namespace

template <class T>
Tensor<T> compute(const Inputs<T>& in) {
    detail::check_shapes(in);
    const auto& x = in.operands[0];
    switch (in.kernel) {
        case Kernel::convolution: return convolution(in);
        case Kernel::fully_connected: return fully_connected(in);
        case Kernel::relu: return map(x, [](T v) { return v > T(0) ? v : T(0); });
        case Kernel::sigmoid:
            return map(x, [](T v) {
                const double d = static_cast<double>(v);
                if (d >= 0.0) return static_cast<T>(1.0 / (1.0 + std::exp(-d)));
                const double e = std::exp(d);
                return static_cast<T>(e / (1.0 + e));
            });
        case Kernel::tanh: return map(x, [](T v) { return static_cast<T>(std::tanh(static_cast<double>(v))); });
        case Kernel::max_pooling: return pooling(in, true);
        case Kernel::avg_pooling: return pooling(in, false);
        case Kernel::cosine_norm: return cosine_norm(in);
        case Kernel::batch_norm: return batch_norm(in);
        case Kernel::dropout: {
            const auto keep = detail::dropout_mask(x.size(), in.params.rate, in.params.seed);
            const double scale = 1.0 / (1.0 - in.params.rate);
            Tensor<T> out;
            out.shape = x.shape;
            out.data.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                out.data[i] = static_cast<T>(static_cast<double>(x.data[i]) * (keep[i] ? scale : 0.0));
            return out;
        }
        case Kernel::elementwise_multiply: {
            Tensor<T> out;
            out.shape = x.shape;
            out.data.resize(x.size());
            const auto& y = in.operands[1];
            std::transform(x.data.begin(), x.data.end(), y.data.begin(), out.data.begin(), std::multiplies<T>());
            return out;
        }
        case Kernel::softmax: return softmax(in);
        case Kernel::data_arrangement: return transpose(in);
        case Kernel::memcpy: {
            Tensor<T> out;
            out.shape = x.shape;
            out.data.resize(x.size());
            std::memcpy(out.data.data(), x.data.data(), x.size() * sizeof(T));
            return out;
        }
    }
    throw Error(ErrorCode::UnknownKernel, "unhandled kernel");
}

template Inputs<float> make_inputs<float>(Kernel, std::span<const std::size_t>, const Params&, std::uint64_t);
template Inputs<double> make_inputs<double>(Kernel, std::span<const std::size_t>, const Params&, std::uint64_t);
template Tensor<float> compute<float>(const Inputs<float>&);
template Tensor<double> compute<double>(const Inputs<double>&);

// --- timing harness -------------------------------------------------------

namespace {

template <class T>
std::uint64_t checksum(const Tensor<T>& t) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
    for (std::size_t i = 0; i < t.data.size() * sizeof(T); ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

template <class T>
double flop_estimate(const Inputs<T>& in, const Tensor<T>& out) {
    const double n_out = static_cast<double>(out.size());
    switch (in.kernel) {
        case Kernel::convolution: return 2.0 * n_out * static_cast<double>(in.operands[1].size());
        case Kernel::fully_connected: return 2.0 * n_out * static_cast<double>(in.operands[0].dim(1));
        case Kernel::max_pooling:
        case Kernel::avg_pooling: return n_out * static_cast<double>(in.params.window * in.params.window);
        case Kernel::softmax:
        case Kernel::cosine_norm:
        case Kernel::batch_norm: return 3.0 * n_out;
        case Kernel::data_arrangement:
        case Kernel::memcpy: return 0.0;
        default: return n_out;
    }
}

template <class T>
KernelResult timed(const KernelSpec& spec) {
    const Inputs<T> in = make_inputs<T>(spec.kernel, spec.shape, spec.params, spec.seed);
    KernelResult r;
    r.name = std::string(name_of(spec.kernel));
    r.shape = spec.shape;
    r.reps = std::max<std::size_t>(spec.reps, 1);
    Tensor<T> out = compute(in);  // warm-up
    std::vector<Nanos> times;
    times.reserve(r.reps);
    double total = 0.0;
    for (std::size_t i = 0; i < r.reps; ++i) {
        const Nanos t0 = monotonic_now();
        out = compute(in);
        Nanos dt = monotonic_now() - t0;
        if (dt <= Nanos::zero()) dt = Nanos{1};
        times.push_back(dt);
        total += static_cast<double>(dt.count());
    }
    r.min = *std::min_element(times.begin(), times.end());
    r.mean = Nanos{static_cast<std::int64_t>(std::llround(total / static_cast<double>(r.reps)))};
    r.p99 = percentile(times, 99);
    // Rounding the mean can undercut an all-equal minimum by at most 1 ns.
    r.mean = std::clamp(r.mean, r.min, r.p99);
    r.checksum = checksum(out);
    std::uint64_t bytes = out.size() * sizeof(T);
    for (const auto& op : in.operands) bytes += op.size() * sizeof(T);
    r.bytes = bytes;
    r.flops = flop_estimate(in, out);
    return r;
}

}  // namespace

KernelResult run_kernel(const KernelSpec& spec) {
    return spec.precision == Precision::f32 ? timed<float>(spec) : timed<double>(spec);
}

}  // namespace ebf::kernels
