#include "sboxbench/sca_engine.hpp"

#include "sboxbench/parallel.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace sboxbench {

namespace {

// Per-node predictions for one (plaintext, key) replay.
void replay(const Schedule& s, std::uint8_t p, std::uint8_t k, LeakageModel model, std::vector<std::uint8_t>& out) {
    const Program& prog = s.program();
    out.assign(prog.size(), 0);
    const DesignInputs in{p, k, k, MaskSet::derive(0, 0, 0, 0)};
    if (model != LeakageModel::HD) {
        std::vector<std::uint32_t> values(prog.size());
        evaluate_design(s.design, in, values);
        for (std::size_t i = 0; i < prog.size(); ++i) out[i] = std::uint8_t(std::popcount(values[i] & 0xFFu));
        return;
    }
    const ExecutionTrace t = execute(s, in, {}, 0, TraceDetail::Events);
    for (const CycleRecord& c : t.cycles)
        for (const NodeEvent& e : c.nodes) out[std::size_t(e.node)] = std::uint8_t(std::popcount((e.value ^ e.prior) & 0xFFu));
}

} // namespace

HypothesisTable::HypothesisTable(const Schedule& s, LeakageModel model, int jobs)
    : model_(model), n_(s.program().size()), h_(n_ * 256 * 256) {
    parallel_for(256, jobs, [&](std::size_t b, std::size_t e) {
        std::vector<std::uint8_t> row;
        for (std::size_t k = b; k < e; ++k)
            for (unsigned p = 0; p < 256; ++p) {
                replay(s, std::uint8_t(p), std::uint8_t(k), model_, row);
                for (std::size_t d = 0; d < n_; ++d) h_[(d * 256 + k) * 256 + p] = row[d];
            }
    });
}

std::vector<double> hypothesize(const Schedule& s, std::span<const std::uint8_t> plaintexts, int descriptor,
                                LeakageModel model, std::uint8_t key_guess) {
    if (descriptor < 0 || std::size_t(descriptor) >= s.program().size()) throw std::out_of_range("hypothesize: unknown descriptor");
    std::vector<double> out;
    out.reserve(plaintexts.size());
    std::vector<std::uint8_t> row;
    for (std::uint8_t p : plaintexts) {
        replay(s, p, key_guess, model, row);
        out.push_back(row[std::size_t(descriptor)]);
    }
    return out;
}

BinnedTraces::BinnedTraces(const TraceMatrix& t) : n_(t.n_traces()) {
    if (n_ < 2) throw std::invalid_argument("cpa: need >= 2 traces");
    key_ = t.meta.front().key;
    for (const TraceMeta& m : t.meta)
        if (m.key != key_) throw std::invalid_argument("cpa: traces mix several keys");

    const Eigen::Index ns = Eigen::Index(t.n_samples());
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t.meta[a].plaintext != t.meta[b].plaintext) return t.meta[a].plaintext < t.meta[b].plaintext;
        for (Eigen::Index c = 0; c < ns; ++c)
            if (t.samples(Eigen::Index(a), c) != t.samples(Eigen::Index(b), c))
                return t.samples(Eigen::Index(a), c) < t.samples(Eigen::Index(b), c);
        return false;
    });

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(ns);
    for (std::size_t i : order) mean += t.samples.row(Eigen::Index(i)).transpose().cast<double>();
    mean /= double(n_);

    count_ = Eigen::VectorXd::Zero(256);
    sums_ = Eigen::MatrixXd::Zero(256, ns);
    sq_ = Eigen::VectorXd::Zero(ns);
    for (std::size_t i : order) {
        const Eigen::VectorXd d = t.samples.row(Eigen::Index(i)).transpose().cast<double>() - mean;
        const int p = t.meta[i].plaintext;
        count_(p) += 1;
        sums_.row(p) += d.transpose();
        sq_ += d.cwiseProduct(d);
    }
}

Eigen::MatrixXd BinnedTraces::correlation(const HypothesisTable& h, std::size_t descriptor) const {
    if (descriptor >= h.descriptors()) throw std::out_of_range("cpa: unknown descriptor");
    Eigen::MatrixXd hc(256, 256);
    Eigen::VectorXd var(256);
    for (int k = 0; k < 256; ++k) {
        double mean = 0;
        for (int p = 0; p < 256; ++p) mean += count_(p) * h.at(descriptor, std::uint8_t(k), std::uint8_t(p));
        mean /= double(n_);
        double v = 0;
        for (int p = 0; p < 256; ++p) {
            const double c = h.at(descriptor, std::uint8_t(k), std::uint8_t(p)) - mean;
            hc(k, p) = c;
            v += count_(p) * c * c;
        }
        var(k) = v;
    }
    Eigen::MatrixXd r = hc * sums_;
    for (Eigen::Index k = 0; k < r.rows(); ++k)
        for (Eigen::Index c = 0; c < r.cols(); ++c) {
            const double d = var(k) * sq_(c);
            r(k, c) = d > 0 ? r(k, c) / std::sqrt(d) : 0.0;
        }
    return r;
}

CpaResult cpa_attack(const BinnedTraces& traces, const HypothesisTable& h, int descriptor) {
    const Eigen::MatrixXd r = traces.correlation(h, std::size_t(descriptor));
    CpaResult res;
    res.descriptor_id = descriptor;
    res.model = h.model();
    res.max_abs_rho.assign(256, 0.0);
    std::vector<int> arg(256, 0);
    for (int k = 0; k < 256; ++k) {
        Eigen::Index idx = 0;
        res.max_abs_rho[std::size_t(k)] = r.row(k).cwiseAbs().maxCoeff(&idx);
        arg[std::size_t(k)] = int(idx);
    }
    res.best_key = int(std::max_element(res.max_abs_rho.begin(), res.max_abs_rho.end()) - res.max_abs_rho.begin());
    res.best_sample_index = arg[std::size_t(res.best_key)];
    const double truth = res.max_abs_rho[traces.true_key()];
    int rank = 1;
    for (int k = 0; k < 256; ++k)
        if (k != traces.true_key() && res.max_abs_rho[std::size_t(k)] >= truth) ++rank;
    res.rank_of_true_key = rank;
    res.success = rank == 1;
    return res;
}

CpaResult cpa_attack(const TraceMatrix& traces, int descriptor, LeakageModel model, int jobs) {
    if (model == LeakageModel::Value) throw std::invalid_argument("cpa: hypotheses are HW or HD");
    const Schedule s = build_schedule(traces.design, traces.profile);
    const HypothesisTable h(s, model, jobs);
    return cpa_attack(BinnedTraces(traces), h, descriptor);
}

std::vector<CpaResult> cpa_sweep(const TraceMatrix& traces, int jobs) {
    const Schedule s = build_schedule(traces.design, traces.profile);
    const BinnedTraces bins(traces);
    const HypothesisTable hw(s, LeakageModel::HW, jobs), hd(s, LeakageModel::HD, jobs);
    const std::size_t n = hw.descriptors();
    std::vector<CpaResult> out(2 * n);
    parallel_for(2 * n, jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = cpa_attack(bins, i % 2 ? hd : hw, int(i / 2));
    });
    return out;
}

TTestResult welch_ttest(const SampleMatrix& a, const SampleMatrix& b) {
    if (a.rows() < 2 || b.rows() < 2 || a.cols() != b.cols()) throw std::invalid_argument("welch_ttest: need >= 2 traces per set and equal widths");
    auto moments = [](const SampleMatrix& m, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
        const Eigen::MatrixXd x = m.cast<double>();
        mean = x.colwise().mean().transpose();
        var = (x.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / double(m.rows() - 1);
    };
    Eigen::VectorXd ma, va, mb, vb;
    moments(a, ma, va);
    moments(b, mb, vb);
    TTestResult r;
    const Eigen::Index ns = a.cols();
    r.t.assign(std::size_t(ns), 0.0);
    r.degenerate.assign(std::size_t(ns), false);
    for (Eigen::Index c = 0; c < ns; ++c) {
        const double d = va(c) / double(a.rows()) + vb(c) / double(b.rows());
        if (d > 0)
            r.t[std::size_t(c)] = (ma(c) - mb(c)) / std::sqrt(d);
        else
            r.degenerate[std::size_t(c)] = true;
        if (std::abs(r.t[std::size_t(c)]) > r.max_abs_t) {
            r.max_abs_t = std::abs(r.t[std::size_t(c)]);
            r.max_index = int(c);
        }
    }
    r.leaky = r.max_abs_t > kTvlaThreshold;
    return r;
}

TTestResult welch_ttest(const TraceMatrix& a, const TraceMatrix& b) { return welch_ttest(a.samples, b.samples); }

TTestResult fixed_vs_random_campaign(const Schedule& s, const FixedVsRandomOptions& opt) {
    if (opt.n_per_set < 100) throw std::invalid_argument("fixed_vs_random: n_per_set must be >= 100");
    const std::uint64_t seed = opt.sim.noise.seed;
    std::vector<std::uint8_t> fixed(opt.n_per_set, opt.fixed_input), random(opt.n_per_set);
    auto prng = substream(seed, 0, stream::kPlaintext);
    for (auto& p : random) p = std::uint8_t(prng());

    SimOptions a = opt.sim, b = opt.sim;
    if (!a.fake_key) a.fake_key = b.fake_key = default_fake_key(seed);
    a.noise.seed = substream(seed, 0, stream::kSetA)();
    b.noise.seed = substream(seed, 0, stream::kSetB)();
    const TraceMatrix ta = simulate_traces(s, fixed, opt.key, a);
    const TraceMatrix tb = simulate_traces(s, random, opt.key, b);
    return welch_ttest(ta, tb);
}

} // namespace sboxbench
