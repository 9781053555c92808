#pragma once

// CPA against every intermediate, and fixed-vs-random Welch t-tests.

#include "sboxbench/leakage_sim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sboxbench {

inline constexpr double kTvlaThreshold = 4.5;

/// Sample Pearson coefficients, keys x samples. Two-pass and centered, in double.
/// Constant columns give 0.
template <class TracesT, class HypT>
Eigen::MatrixXd pearson(const Eigen::MatrixBase<TracesT>& traces, const Eigen::MatrixBase<HypT>& hyp) {
    const Eigen::Index n = traces.rows();
    if (n < 2 || hyp.rows() != n) throw std::invalid_argument("pearson: need >= 2 traces and matching rows");
    Eigen::MatrixXd x = traces.template cast<double>();
    Eigen::MatrixXd h = hyp.template cast<double>();
    x.rowwise() -= x.colwise().mean();
    h.rowwise() -= h.colwise().mean();
    const Eigen::VectorXd sx = x.colwise().squaredNorm().transpose();
    const Eigen::VectorXd sh = h.colwise().squaredNorm().transpose();
    Eigen::MatrixXd r = h.transpose() * x;
    for (Eigen::Index k = 0; k < r.rows(); ++k)
        for (Eigen::Index c = 0; c < r.cols(); ++c) {
            const double d = sh(k) * sx(c);
            r(k, c) = d > 0 ? r(k, c) / std::sqrt(d) : 0.0;
        }
    return r;
}

/// Predicted leakage of every intermediate for every (key guess, plaintext),
/// replayed through the schedule with all masks zero. CNG uses the true slice.
class HypothesisTable {
public:
    HypothesisTable(const Schedule& s, LeakageModel model, int jobs = 1);

    LeakageModel model() const { return model_; }
    std::size_t descriptors() const { return n_; }
    std::uint8_t at(std::size_t descriptor, std::uint8_t key, std::uint8_t plaintext) const {
        return h_[(descriptor * 256 + key) * 256 + plaintext];
    }

private:
    LeakageModel model_;
    std::size_t n_;
    std::vector<std::uint8_t> h_;
};

/// Per-trace prediction for one descriptor under one key guess.
std::vector<double> hypothesize(const Schedule& s, std::span<const std::uint8_t> plaintexts, int descriptor,
                                LeakageModel model, std::uint8_t key_guess);

struct CpaResult {
    int descriptor_id = 0;
    LeakageModel model = LeakageModel::HW;
    std::vector<double> max_abs_rho; // per key guess, over samples
    int best_key = 0;
    int best_sample_index = 0;
    int rank_of_true_key = 0;
    bool success = false;
};

/// Traces grouped by plaintext, in a canonical order, so that a CPA only needs
/// 256 x 256 hypothesis rows and the result is independent of trace order.
class BinnedTraces {
public:
    explicit BinnedTraces(const TraceMatrix& t);

    std::uint8_t true_key() const { return key_; }
    std::size_t n_traces() const { return n_; }
    std::size_t n_samples() const { return std::size_t(sums_.cols()); }

    /// Correlation of every key guess with every sample: 256 x n_samples.
    Eigen::MatrixXd correlation(const HypothesisTable& h, std::size_t descriptor) const;

private:
    std::size_t n_ = 0;
    std::uint8_t key_ = 0;
    Eigen::VectorXd count_;   // traces per plaintext
    Eigen::MatrixXd sums_;    // 256 x samples, centered: sum over the bin of (x - mean)
    Eigen::VectorXd sq_;      // per sample, sum of (x - mean)^2
};

CpaResult cpa_attack(const BinnedTraces& traces, const HypothesisTable& h, int descriptor);
CpaResult cpa_attack(const TraceMatrix& traces, int descriptor, LeakageModel model, int jobs = 1);

/// Every descriptor under HW and HD, sorted by (descriptor, model).
std::vector<CpaResult> cpa_sweep(const TraceMatrix& traces, int jobs = 1);

struct TTestResult {
    std::vector<double> t;
    std::vector<bool> degenerate; // zero variance in both sets; t reported as 0
    double max_abs_t = 0;
    int max_index = 0;
    bool leaky = false;
};

TTestResult welch_ttest(const SampleMatrix& a, const SampleMatrix& b);
TTestResult welch_ttest(const TraceMatrix& a, const TraceMatrix& b);

struct FixedVsRandomOptions {
    std::size_t n_per_set = 100000;
    SimOptions sim{};
    std::uint8_t fixed_input = 0x00;
    std::uint8_t key = 0x2B;
};

TTestResult fixed_vs_random_campaign(const Schedule& s, const FixedVsRandomOptions& opt);

} // namespace sboxbench
