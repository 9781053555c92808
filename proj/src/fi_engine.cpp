#include "sboxbench/fi_engine.hpp"

#include "sboxbench/leakage_sim.hpp"
#include "sboxbench/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sboxbench {

namespace {

double z_for(double confidence) {
    // two-sided standard normal quantiles, to the 4 decimals used by the sizing method
    if (std::abs(confidence - 0.90) < 1e-12) return 1.6449;
    if (std::abs(confidence - 0.95) < 1e-12) return 1.9600;
    if (std::abs(confidence - 0.99) < 1e-12) return 2.5758;
    throw std::invalid_argument("sample_size: confidence must be 0.90, 0.95 or 0.99");
}

DesignInputs stimulus(Design d, std::uint64_t seed, std::uint64_t index) {
    auto rng = substream(seed, index, stream::kStimulus);
    DesignInputs in;
    const std::uint64_t v = rng();
    in.plaintext = std::uint8_t(v);
    in.key = std::uint8_t(v >> 8);
    if (d == Design::CNG) in.fake_key = default_fake_key(seed);
    if (d == Design::Masked) in.masks = fresh_masks(rng);
    return in;
}

double choose(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

} // namespace

std::string_view to_string(Outcome o) {
    switch (o) {
    case Outcome::Silent: return "Silent";
    case Outcome::Critical: return "Critical";
    case Outcome::Hang: return "Hang";
    case Outcome::Detected: return "Detected";
    }
    return "?";
}

std::vector<FaultSite> enumerate_fault_sites(const Schedule& s) {
    std::vector<FaultSite> out;
    out.reserve(std::size_t(s.total_register_bits()) * std::size_t(s.nominal_latency));
    for (int c = 0; c < s.nominal_latency; ++c)
        for (std::size_t r = 0; r < s.registers.size(); ++r)
            for (int b = 0; b < s.registers[r].width; ++b) out.push_back({int(r), b, c});
    return out;
}

std::size_t sample_size(std::optional<double> population, double e, double confidence, double p) {
    if (!(e > 0 && e < 1)) throw std::invalid_argument("sample_size: margin must be in (0, 1)");
    if (!(p > 0 && p < 1)) throw std::invalid_argument("sample_size: proportion must be in (0, 1)");
    const double z = z_for(confidence);
    const double n0 = z * z * p * (1 - p) / (e * e);
    if (!population) return std::size_t(std::ceil(n0));
    const double N = *population;
    if (!(N >= 1)) throw std::invalid_argument("sample_size: population must be >= 1");
    return std::size_t(std::ceil(N / (1 + e * e * (N - 1) / (z * z * p * (1 - p)))));
}

std::uint8_t true_output(Design d, const ExecutionTrace& t) {
    switch (d) {
    case Design::UHLS: return std::uint8_t(t.outputs.at(0));
    case Design::CNG: return std::uint8_t(t.outputs.at(0) & 0xFF);
    case Design::Masked: return remove_mask(std::uint8_t(t.outputs.at(0)), std::uint8_t(t.outputs.at(1)));
    }
    return 0;
}

Outcome classify(const ExecutionTrace& trace, const ExecutionTrace& golden, Design design, const DesignInputs& in) {
    if (trace.status == ExecStatus::Hung) return Outcome::Hang;
    if (design == Design::CNG && cng_alarm(in.plaintext, in.fake_key, std::uint8_t(trace.outputs.at(0) >> 8)))
        return Outcome::Detected;
    return true_output(design, trace) == true_output(design, golden) ? Outcome::Silent : Outcome::Critical;
}

FaultOutcome inject(const Schedule& s, const DesignInputs& in, const FaultSpec& spec, const ExecutionTrace& golden) {
    FaultPlan plan;
    plan.reserve(spec.flips.size());
    for (const auto& [reg, bit] : spec.flips) plan.push_back({spec.cycle, reg, bit});
    const ExecutionTrace t = execute(s, in, plan, 0, TraceDetail::Outputs);
    return {spec, classify(t, golden, s.design, in)};
}

std::vector<DesignInputs> make_stimuli(Design d, std::size_t count, std::uint64_t seed) {
    std::vector<DesignInputs> v;
    for (std::size_t i = 0; i < count; ++i) v.push_back(stimulus(d, seed, i));
    return v;
}

void CampaignReport::finalize() {
    samples = 0;
    for (auto c : counts) samples += c;
    for (int i = 0; i < kOutcomeCount; ++i) rates[std::size_t(i)] = samples ? double(counts[std::size_t(i)]) / double(samples) : 0.0;
}

CampaignReport run_sbf_campaign(const Schedule& s, const std::vector<DesignInputs>& inputs, std::uint64_t seed, int jobs) {
    const auto sites = enumerate_fault_sites(s);
    std::vector<ExecutionTrace> golden;
    for (const DesignInputs& in : inputs) golden.push_back(execute(s, in, {}, 0, TraceDetail::Outputs));

    const std::size_t total = sites.size() * inputs.size();
    std::vector<Outcome> outcome(total);
    std::vector<char> wrong(total, 0);
    parallel_for(total, jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const FaultSite& site = sites[i / inputs.size()];
            const std::size_t k = i % inputs.size();
            const ScheduledFlip f{site.cycle, site.reg, site.bit};
            const ExecutionTrace t = execute(s, inputs[k], std::span(&f, 1), 0, TraceDetail::Outputs);
            outcome[i] = classify(t, golden[k], s.design, inputs[k]);
            if (outcome[i] == Outcome::Detected) wrong[i] = true_output(s.design, t) != true_output(s.design, golden[k]);
        }
    });

    CampaignReport r;
    r.design = s.design;
    r.profile = s.profile;
    r.multiplicity = 1;
    r.population = double(total);
    r.seed = seed;
    r.confidence = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
        const FaultSite& site = sites[i / inputs.size()];
        const auto o = std::size_t(outcome[i]);
        ++r.counts[o];
        ++r.by_slice[std::size_t(s.slice_of(site.reg, site.bit))][o];
        ++r.by_kind[std::size_t(s.registers[std::size_t(site.reg)].kind)][o];
        r.would_be_critical += std::uint64_t(wrong[i]);
    }
    r.finalize();
    return r;
}

FaultSpec draw_mbf_fault(const Schedule& s, int multiplicity, std::uint64_t seed, std::uint64_t index) {
    const int bits = s.total_register_bits();
    if (multiplicity < 1 || multiplicity > bits) throw std::invalid_argument("mbf: multiplicity exceeds register bits");
    auto rng = substream(seed, index, stream::kFault);
    FaultSpec f;
    f.cycle = std::uniform_int_distribution<int>(0, s.nominal_latency - 1)(rng);
    // Floyd's sampling of distinct global bit positions
    std::vector<int> chosen;
    for (int j = bits - multiplicity; j < bits; ++j) {
        const int t = std::uniform_int_distribution<int>(0, j)(rng);
        chosen.push_back(std::find(chosen.begin(), chosen.end(), t) == chosen.end() ? t : j);
    }
    std::sort(chosen.begin(), chosen.end());
    for (int g : chosen) {
        int r = 0;
        while (g >= s.registers[std::size_t(r)].width) g -= s.registers[std::size_t(r++)].width;
        f.flips.emplace_back(r, g);
    }
    return f;
}

CampaignReport run_mbf_campaign(const Schedule& s, const MbfOptions& opt) {
    const int bits = s.total_register_bits();
    if (opt.multiplicity < 2 || opt.multiplicity > bits) throw std::invalid_argument("mbf: multiplicity out of range");
    const double population = choose(bits, opt.multiplicity) * double(s.nominal_latency);
    const std::size_t n = sample_size(population, opt.margin, opt.confidence, 0.5);

    std::vector<Outcome> outcome(n);
    std::vector<char> wrong(n, 0);
    parallel_for(n, opt.jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const DesignInputs in = stimulus(s.design, opt.seed, i);
            const ExecutionTrace golden = execute(s, in, {}, 0, TraceDetail::Outputs);
            const FaultSpec f = draw_mbf_fault(s, opt.multiplicity, opt.seed, i);
            FaultPlan plan;
            for (const auto& [reg, bit] : f.flips) plan.push_back({f.cycle, reg, bit});
            const ExecutionTrace t = execute(s, in, plan, 0, TraceDetail::Outputs);
            outcome[i] = classify(t, golden, s.design, in);
            if (outcome[i] == Outcome::Detected) wrong[i] = true_output(s.design, t) != true_output(s.design, golden);
        }
    });

    CampaignReport r;
    r.design = s.design;
    r.profile = s.profile;
    r.multiplicity = opt.multiplicity;
    r.population = population;
    r.margin = opt.margin;
    r.confidence = opt.confidence;
    r.seed = opt.seed;
    for (std::size_t i = 0; i < n; ++i) {
        ++r.counts[std::size_t(outcome[i])];
        r.would_be_critical += std::uint64_t(wrong[i]);
    }
    r.finalize();
    return r;
}

} // namespace sboxbench
