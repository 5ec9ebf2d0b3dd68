// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <span>
#include <vector>

namespace ebf {

/// Closed-form predictions work in floating-point seconds.
using Seconds = std::chrono::duration<double>;

struct QueuePrediction {
    double lambda = 0.0;  // arrivals per second
    double mu = 0.0;      // service completions per second
    double p = 99.0;
    Seconds t_mean{};
    Seconds t_p{};
};

/// M/M/1 mean response time 1/(mu - lambda). Throws UnstableSystem unless
/// 0 <= lambda < mu.
Seconds mm1_mean(double lambda, double mu);

/// M/M/1 p-th percentile response time -ln(1 - p/100)/(mu - lambda).
/// Throws UnstableSystem, or InvalidPercentile unless 0 < p < 100.
Seconds mm1_percentile(double lambda, double mu, double p);

QueuePrediction predict_mm1(double lambda, double mu, double p = 99.0);

// M/M/k via Erlang C. Not part of the M/M/1 reproduction; checked against
// the simulator only.

/// Probability an arrival has to wait when all k servers are busy.
double erlang_c(double lambda, double mu, unsigned k);
Seconds mmk_mean_wait(double lambda, double mu, unsigned k);
Seconds mmk_mean_response(double lambda, double mu, unsigned k);

struct MeasuredPoint {
    double lambda = 0.0;
    Seconds mean{};
    Seconds tail{};  // at the prediction's percentile
};

struct GapSetting {
    double lambda = 0.0;
    Seconds measured_mean{}, predicted_mean{};
    Seconds measured_tail{}, predicted_tail{};
    double mean_ratio = 0.0;  // measured / predicted
    double tail_ratio = 0.0;
};

struct GapReport {
    std::vector<GapSetting> settings;
    double mean_ratio_arithmetic = 0.0;
    double tail_ratio_arithmetic = 0.0;
    double mean_ratio_geometric = 0.0;
    double tail_ratio_geometric = 0.0;
};

/// Pairs measured and predicted points in order. Throws MismatchedSettings
/// when the counts or the lambdas disagree.
GapReport gap_report(std::span<const MeasuredPoint> measured, std::span<const QueuePrediction> predicted);

}  // namespace ebf
