#include "sboxbench/fi_engine.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace sboxbench;

namespace {

double rate_sum(const CampaignReport& r) { return std::accumulate(r.rates.begin(), r.rates.end(), 0.0); }

std::uint64_t count(const CampaignReport& r, Outcome o) { return r.counts[std::size_t(o)]; }

} // namespace

TEST(FaultSites, CountAndOrder) {
    const Schedule s = build_schedule(Design::UHLS, Profile::Unrolled);
    const auto sites = enumerate_fault_sites(s);
    ASSERT_EQ(sites.size(), std::size_t(s.total_register_bits() * s.nominal_latency));
    EXPECT_EQ(sites.front(), (FaultSite{0, 0, 0}));
    EXPECT_EQ(sites.back().cycle, s.nominal_latency - 1);
    std::set<std::tuple<int, int, int>> unique;
    for (const FaultSite& f : sites) unique.emplace(f.reg, f.bit, f.cycle);
    EXPECT_EQ(unique.size(), sites.size());
    for (std::size_t i = 1; i < sites.size(); ++i) EXPECT_LE(sites[i - 1].cycle, sites[i].cycle);
}

// n0 = z^2 p (1 - p) / e^2 with z = 2.5758: 2.5758^2 * 0.25 / 1e-4 = 16586.9...
TEST(SampleSize, UnboundedPopulation) {
    EXPECT_EQ(sample_size(std::nullopt, 0.01, 0.99, 0.5), 16587u);
    EXPECT_EQ(sample_size(std::nullopt, 0.01, 0.95, 0.5), 9604u);
    EXPECT_EQ(sample_size(std::nullopt, 0.05, 0.90, 0.5), 271u);
}

// The 4-decimal table z agrees with the exact quantile to 1e-4, so n moves by at most 1.
TEST(SampleSize, TableQuantilesNearExact) {
    const std::pair<double, double> exact[] = {{0.90, 1.6448536}, {0.95, 1.9599640}, {0.99, 2.5758293}};
    for (const auto& [conf, z] : exact) {
        const double n = std::ceil(z * z * 0.25 / 1e-4);
        EXPECT_NEAR(double(sample_size(std::nullopt, 0.01, conf, 0.5)), n, 1.0) << conf;
    }
}

TEST(SampleSize, FinitePopulationIsMonotoneAndBounded) {
    std::size_t prev = 0;
    for (double n = 1; n < 200000; n = std::floor(n * 1.07) + 1) {
        const std::size_t s = sample_size(n, 0.01, 0.99, 0.5);
        EXPECT_LE(prev, s);
        EXPECT_LE(s, std::size_t(n));
        EXPECT_LE(s, 16587u);
        prev = s;
    }
    for (double n = 1000; n < 1100; ++n) EXPECT_LE(sample_size(n, 0.01, 0.99, 0.5), sample_size(n + 1, 0.01, 0.99, 0.5));
    EXPECT_EQ(sample_size(1e15, 0.01, 0.99, 0.5), 16587u);
}

TEST(SampleSize, RejectsBadParameters) {
    EXPECT_THROW(sample_size(std::nullopt, 0.0, 0.99, 0.5), std::invalid_argument);
    EXPECT_THROW(sample_size(std::nullopt, 0.01, 0.98, 0.5), std::invalid_argument);
    EXPECT_THROW(sample_size(std::nullopt, 0.01, 0.99, 1.0), std::invalid_argument);
    EXPECT_THROW(sample_size(0.0, 0.01, 0.99, 0.5), std::invalid_argument);
}

TEST(Classify, Precedence) {
    const DesignInputs in{0x10, 0x20, 0x30, {}};
    ExecutionTrace golden;
    golden.outputs = {std::uint32_t(oracle::kAesSbox[0x10 ^ 0x30]) << 8 | oracle::kAesSbox[0x10 ^ 0x20]};
    ExecutionTrace t = golden;
    EXPECT_EQ(classify(t, golden, Design::CNG, in), Outcome::Silent);
    t.outputs[0] ^= 0x01;
    EXPECT_EQ(classify(t, golden, Design::CNG, in), Outcome::Critical);
    t.outputs[0] ^= 0x0100; // fake byte also wrong: alarm wins
    EXPECT_EQ(classify(t, golden, Design::CNG, in), Outcome::Detected);
    t.status = ExecStatus::Hung;
    EXPECT_EQ(classify(t, golden, Design::CNG, in), Outcome::Hang);
}

TEST(Classify, MaskedComparesUnmaskedOutput) {
    const Schedule s = build_schedule(Design::Masked, Profile::Unrolled);
    const DesignInputs in{0x53, 0x00, 0, MaskSet::derive(0x11, 2, 3, 1)};
    const ExecutionTrace golden = execute(s, in, {}, 0, TraceDetail::Outputs);
    EXPECT_EQ(true_output(Design::Masked, golden), oracle::kAesSbox[0x53]);
    ExecutionTrace t = golden;
    t.outputs[0] ^= 0x80;
    t.outputs[1] ^= 0x80; // same change on data and mask: value unchanged
    EXPECT_EQ(classify(t, golden, Design::Masked, in), Outcome::Silent);
    t.outputs[1] ^= 0x80;
    EXPECT_EQ(classify(t, golden, Design::Masked, in), Outcome::Critical);
}

TEST(Inject, OutputRegisterFlipIsCritical) {
    const Schedule s = build_schedule(Design::UHLS, Profile::Rolled);
    const DesignInputs in{0x01, 0x02, 0, {}};
    const ExecutionTrace golden = execute(s, in, {}, 0, TraceDetail::Outputs);
    const int out = s.output_register.front();
    const FaultOutcome f = inject(s, in, {{{out, 3}}, s.nominal_latency - 1}, golden);
    EXPECT_EQ(f.classification, Outcome::Critical);
}

TEST(Sbf, PartitionAndUnprotectedShape) {
    for (Design d : {Design::UHLS, Design::Masked})
        for (Profile p : {Profile::Rolled, Profile::Unrolled, Profile::Modular}) {
            const Schedule s = build_schedule(d, p);
            const auto inputs = make_stimuli(d, 2, 7);
            const CampaignReport r = run_sbf_campaign(s, inputs, 7, 4);
            EXPECT_EQ(r.samples, enumerate_fault_sites(s).size() * inputs.size());
            EXPECT_NEAR(rate_sum(r), 1.0, 1e-9);
            EXPECT_EQ(count(r, Outcome::Detected), 0u) << to_string(d) << ' ' << to_string(p);
            EXPECT_GT(count(r, Outcome::Critical), 0u);
        }
}

TEST(Sbf, UnrolledUhlsMoreCriticalThanRolled) {
    const auto inputs = make_stimuli(Design::UHLS, 4, 3);
    const CampaignReport rolled = run_sbf_campaign(build_schedule(Design::UHLS, Profile::Rolled), inputs, 3, 4);
    const CampaignReport unrolled = run_sbf_campaign(build_schedule(Design::UHLS, Profile::Unrolled), inputs, 3, 4);
    EXPECT_GT(unrolled.rates[std::size_t(Outcome::Critical)], rolled.rates[std::size_t(Outcome::Critical)]);
}

TEST(Sbf, CngSliceIsolation) {
    for (Profile p : {Profile::Rolled, Profile::Unrolled, Profile::Modular}) {
        const Schedule s = build_schedule(Design::CNG, p);
        const CampaignReport r = run_sbf_campaign(s, make_stimuli(Design::CNG, 3, 5), 5, 4);
        const auto& shared = r.by_slice[std::size_t(SliceClass::Shared)];
        const auto& fake = r.by_slice[std::size_t(SliceClass::FakeSlice)];
        const auto& truth = r.by_slice[std::size_t(SliceClass::TrueSlice)];
        EXPECT_EQ(shared[std::size_t(Outcome::Critical)], 0u) << to_string(p);
        EXPECT_EQ(fake[std::size_t(Outcome::Critical)], 0u) << to_string(p);
        EXPECT_GT(truth[std::size_t(Outcome::Critical)], 0u) << to_string(p);
        EXPECT_GT(r.counts[std::size_t(Outcome::Detected)], 0u);
        EXPECT_NEAR(rate_sum(r), 1.0, 1e-9);
        std::uint64_t total = 0;
        for (const auto& row : r.by_slice) total += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
        EXPECT_EQ(total, r.samples);
    }
}

// A flip in the shared FSM at a step boundary corrupts both lanes; the
// wrong true byte is caught by the alarm and counted as would-be critical.
TEST(Sbf, SharedControlFaultIsDetected) {
    const Schedule s = build_schedule(Design::CNG, Profile::Rolled);
    const CampaignReport r = run_sbf_campaign(s, make_stimuli(Design::CNG, 2, 9), 9, 4);
    const auto& shared = r.by_slice[std::size_t(SliceClass::Shared)];
    EXPECT_GT(shared[std::size_t(Outcome::Detected)] + shared[std::size_t(Outcome::Hang)], 0u);
    EXPECT_GT(r.would_be_critical, 0u);
    EXPECT_LE(r.would_be_critical, count(r, Outcome::Detected));
}

TEST(Sbf, Deterministic) {
    const Schedule s = build_schedule(Design::CNG, Profile::Modular);
    const auto inputs = make_stimuli(Design::CNG, 2, 11);
    const CampaignReport a = run_sbf_campaign(s, inputs, 11, 1);
    const CampaignReport b = run_sbf_campaign(s, inputs, 11, 8);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(a.by_slice, b.by_slice);
    EXPECT_EQ(a.would_be_critical, b.would_be_critical);
}

TEST(Mbf, FaultDrawsAreDistinctBits) {
    const Schedule s = build_schedule(Design::Masked, Profile::Rolled);
    for (int m = 2; m <= 5; ++m)
        for (std::uint64_t i = 0; i < 200; ++i) {
            const FaultSpec f = draw_mbf_fault(s, m, 1, i);
            ASSERT_EQ(f.flips.size(), std::size_t(m));
            std::set<std::pair<int, int>> u(f.flips.begin(), f.flips.end());
            EXPECT_EQ(u.size(), std::size_t(m));
            EXPECT_GE(f.cycle, 0);
            EXPECT_LT(f.cycle, s.nominal_latency);
            for (const auto& [reg, bit] : f.flips) EXPECT_LT(bit, s.registers[std::size_t(reg)].width);
            const FaultSpec g = draw_mbf_fault(s, m, 1, i);
            EXPECT_EQ(f.flips, g.flips);
        }
}

TEST(Mbf, SizedCampaignAndSeedStability) {
    const Schedule s = build_schedule(Design::CNG, Profile::Unrolled);
    MbfOptions o;
    o.multiplicity = 3;
    o.margin = 0.02;
    o.confidence = 0.99;
    o.jobs = 4;
    o.seed = 1;
    const CampaignReport a = run_mbf_campaign(s, o);
    const double bits = s.total_register_bits();
    const double pop = bits * (bits - 1) * (bits - 2) / 6 * s.nominal_latency;
    EXPECT_DOUBLE_EQ(a.population, pop);
    EXPECT_EQ(a.samples, sample_size(pop, 0.02, 0.99, 0.5));
    EXPECT_NEAR(rate_sum(a), 1.0, 1e-9);
    o.seed = 2;
    const CampaignReport b = run_mbf_campaign(s, o);
    for (int k = 0; k < kOutcomeCount; ++k) EXPECT_NEAR(a.rates[std::size_t(k)], b.rates[std::size_t(k)], 3 * o.margin);
    o.seed = 1;
    o.jobs = 1;
    EXPECT_EQ(run_mbf_campaign(s, o).counts, a.counts);
    o.multiplicity = 1;
    EXPECT_THROW(run_mbf_campaign(s, o), std::invalid_argument);
}
