// SPDX-License-Identifier: Apache-2.0
#include "ebf/queuing.hpp"

#include <cmath>
#include <string>

#include "ebf/error.hpp"

namespace ebf {

namespace {

void check_stable(double lambda, double mu) {
    if (!(lambda >= 0.0) || !(mu > 0.0) || !(lambda < mu))
        throw Error(ErrorCode::UnstableSystem,
                    "need 0 <= lambda < mu, got lambda=" + std::to_string(lambda) + " mu=" + std::to_string(mu));
}

}  // namespace

Seconds mm1_mean(double lambda, double mu) {
    check_stable(lambda, mu);
    return Seconds{1.0 / (mu - lambda)};
}

Seconds mm1_percentile(double lambda, double mu, double p) {
    check_stable(lambda, mu);
    if (!(p > 0.0 && p < 100.0))
        throw Error(ErrorCode::InvalidPercentile, "M/M/1 percentile needs 0 < p < 100, got " + std::to_string(p));
    return Seconds{-std::log(1.0 - p / 100.0) / (mu - lambda)};
}

QueuePrediction predict_mm1(double lambda, double mu, double p) {
    return QueuePrediction{lambda, mu, p, mm1_mean(lambda, mu), mm1_percentile(lambda, mu, p)};
}

double erlang_c(double lambda, double mu, unsigned k) {
    if (k == 0) throw Error(ErrorCode::UnstableSystem, "M/M/k needs k >= 1");
    check_stable(lambda, mu * k);
    const double a = lambda / mu;
    const double rho = a / k;
    // term_n = a^n / n!, accumulated without overflow
    double term = 1.0;
    double below_k = 0.0;
    for (unsigned n = 0; n < k; ++n) {
        below_k += term;
        term *= a / static_cast<double>(n + 1);
    }
    const double tail = term / (1.0 - rho);
    return tail / (below_k + tail);
}

Seconds mmk_mean_wait(double lambda, double mu, unsigned k) {
    return Seconds{erlang_c(lambda, mu, k) / (k * mu - lambda)};
}

Seconds mmk_mean_response(double lambda, double mu, unsigned k) { return mmk_mean_wait(lambda, mu, k) + Seconds{1.0 / mu}; }

GapReport gap_report(std::span<const MeasuredPoint> measured, std::span<const QueuePrediction> predicted) {
    if (measured.size() != predicted.size() || measured.empty())
        throw Error(ErrorCode::MismatchedSettings, std::to_string(measured.size()) + " measured settings vs " +
                                                       std::to_string(predicted.size()) + " predictions");
    GapReport out;
    double log_mean = 0.0, log_tail = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const auto& m = measured[i];
        const auto& p = predicted[i];
        if (std::abs(m.lambda - p.lambda) > 1e-9 * std::max(1.0, std::abs(p.lambda)))
            throw Error(ErrorCode::MismatchedSettings, "setting " + std::to_string(i) + ": measured lambda " +
                                                           std::to_string(m.lambda) + " vs predicted " + std::to_string(p.lambda));
        GapSetting g;
        g.lambda = m.lambda;
        g.measured_mean = m.mean;
        g.predicted_mean = p.t_mean;
        g.measured_tail = m.tail;
        g.predicted_tail = p.t_p;
        g.mean_ratio = m.mean / p.t_mean;
        g.tail_ratio = m.tail / p.t_p;
        out.mean_ratio_arithmetic += g.mean_ratio;
        out.tail_ratio_arithmetic += g.tail_ratio;
        log_mean += std::log(g.mean_ratio);
        log_tail += std::log(g.tail_ratio);
        out.settings.push_back(g);
    }
    const auto n = static_cast<double>(measured.size());
    out.mean_ratio_arithmetic /= n;
    out.tail_ratio_arithmetic /= n;
    out.mean_ratio_geometric = std::exp(log_mean / n);
    out.tail_ratio_geometric = std::exp(log_tail / n);
    return out;
}

}  // namespace ebf
