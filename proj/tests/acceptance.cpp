// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "sboxbench/fi_engine.hpp"
#include "sboxbench/gf_tower.hpp"
#include "sboxbench/parallel.hpp"
#include "sboxbench/reporting.hpp"
#include "sboxbench/sca_engine.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace sboxbench;
namespace fs = std::filesystem;

namespace {

constexpr Design kDesigns[] = {Design::UHLS, Design::CNG, Design::Masked};
constexpr Profile kProfiles[] = {Profile::Rolled, Profile::Unrolled, Profile::Modular};

int jobs_available() { return int(std::max(1u, std::min(16u, std::thread::hardware_concurrency()))); }

struct Verdict {
    bool pass = true;
    std::string detail;
    void require(bool ok, const std::string& why) {
        if (!ok && pass) detail = why;
        pass = pass && ok;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1. FIPS-197 equivalence of every scheduled design
Verdict fips_equivalence() {
    Verdict v;
    std::mt19937_64 rng(197);
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            for (int k = 0; k < 16; ++k) {
                const std::uint8_t key = std::uint8_t(k * 17 + 5);
                for (unsigned pt = 0; pt < 256; ++pt) {
                    const DesignInputs in{std::uint8_t(pt), key, std::uint8_t(rng()), MaskSet::from_index(std::uint32_t(rng() % kMaskCombinations))};
                    const ExecutionTrace t = execute(s, in, {}, 0, TraceDetail::Outputs);
                    const bool ok = t.status == ExecStatus::Completed && true_output(d, t) == oracle::kAesSbox[pt ^ key];
                    if (!ok) {
                        v.require(false, std::string(to_string(d)) + "/" + std::string(to_string(p)) + " mismatch");
                        return v;
                    }
                }
            }
        }
    v.detail = "9 schedules x 16 keys x 256 inputs";
    return v;
}

// 2. tower-field arithmetic against polynomial-basis brute force
Verdict field_oracles() {
    Verdict v;
    for (unsigned a = 0; a < 4; ++a)
        for (unsigned b = 0; b < 4; ++b) v.require(gf4_mul(gf4(a), gf4(b)).bits == oracle::gf4_mul(a, b), "GF(4) mul");
    for (unsigned a = 0; a < 4; ++a) {
        v.require(gf4_sq(gf4(a)).bits == oracle::gf4_mul(a, a), "GF(4) square");
        v.require(gf4_scl_N(gf4(a)).bits == oracle::gf4_mul(oracle::gf4_N(), a), "GF(4) scale N");
        v.require(gf4_scl_N2(gf4(a)).bits == oracle::gf4_mul(oracle::gf4_N2(), a), "GF(4) scale N^2");
    }
    for (unsigned a = 0; a < 16; ++a) {
        for (unsigned b = 0; b < 16; ++b) v.require(gf16_mul(gf16(a), gf16(b)).bits == oracle::gf16_mul(a, b), "GF(16) mul");
        v.require(gf16_sq_scl(gf16(a)).bits == oracle::gf16_mul(oracle::gf16_nu(), oracle::gf16_mul(a, a)), "GF(16) square-scale");
        v.require(gf16_inv(gf16(a)).bits == (a ? oracle::gf16_inv(a) : 0u), "GF(16) inverse");
    }
    for (unsigned t = 0; t < 256; ++t) {
        const std::uint8_t poly = basis_change(std::uint8_t(t), canright::X2A);
        v.require(gf256_inv(GF256{std::uint8_t(t)}).bits == basis_change(std::uint8_t(oracle::aes_inv(poly)), canright::A2X),
                  "GF(256) inverse");
    }
    if (v.pass) v.detail = "GF4 16 pairs, GF16 256 pairs, GF256 256 inverses";
    return v;
}

// 3. every masked intermediate has the same value multiset over all 2^18 masks
Verdict masking_soundness() {
    const Program& prog = design_program(Design::Masked);
    const std::size_t n = prog.size();
    const std::array<std::pair<std::uint8_t, std::uint8_t>, 8> inputs{
        {{0x00, 0x00}, {0x01, 0x00}, {0x53, 0x00}, {0xFF, 0x00}, {0x00, 0x7E}, {0xA5, 0x3C}, {0x10, 0x3F}, {0xC3, 0x43}}};
    std::vector<std::vector<std::uint32_t>> hist(inputs.size(), std::vector<std::uint32_t>(n * 256, 0));
    parallel_for(inputs.size(), jobs_available(), [&](std::size_t b, std::size_t e) {
        std::vector<std::uint32_t> values(n);
        for (std::size_t in = b; in < e; ++in)
            for (std::uint32_t idx = 0; idx < kMaskCombinations; ++idx) {
                evaluate_design(Design::Masked, {inputs[in].first, inputs[in].second, 0, MaskSet::from_index(idx)}, values);
                for (std::size_t i = 0; i < n; ++i) ++hist[in][i * 256 + values[i]];
            }
    });
    Verdict v;
    std::set<int> x;
    for (const auto& [p, k] : inputs) x.insert(p ^ k);
    v.require(x.size() == inputs.size(), "inputs not distinct");
    for (std::size_t in = 1; in < inputs.size(); ++in)
        for (std::size_t i = 0; i < n; ++i)
            if (!std::equal(hist[in].begin() + long(i * 256), hist[in].begin() + long(i * 256 + 256), hist[0].begin() + long(i * 256)))
                v.require(false, "intermediate " + prog.nodes[i].label + " differs");
    if (v.pass) v.detail = std::to_string(n) + " intermediates x 8 inputs x 2^18 masks";
    return v;
}

// 4. noiseless Value-mode UHLS: true key reaches rho = 1 on the S-box output
Verdict cpa_soundness() {
    const Schedule s = build_schedule(Design::UHLS, Profile::Rolled);
    std::vector<std::uint8_t> pts(256);
    std::iota(pts.begin(), pts.end(), 0);
    SimOptions o;
    o.model = LeakageModel::Value;
    o.noise = {0.0, 1};
    const std::uint8_t key = 0x2B;
    const TraceMatrix t = simulate_traces(s, pts, key, o);
    const int d = s.program().outputs.front().node;
    const CpaResult r = cpa_attack(t, d, LeakageModel::HW);
    Verdict v;
    std::vector<double> x;
    for (int i = 0; i < 256; ++i) x.push_back(t.samples(i, d));
    int at_one = 0;
    double runner_up = 0;
    for (int k = 0; k < 256; ++k) {
        const double rho = oracle::pearson(hypothesize(s, pts, d, LeakageModel::HW, std::uint8_t(k)), x);
        if (std::abs(rho - 1.0) <= 1e-12) ++at_one;
        if (k != key) runner_up = std::max(runner_up, std::abs(rho));
    }
    v.require(std::abs(r.max_abs_rho[key] - 1.0) <= 1e-12, "true key rho " + fmt("%.15f", r.max_abs_rho[key]));
    v.require(r.rank_of_true_key == 1 && r.success, "rank " + std::to_string(r.rank_of_true_key));
    v.require(at_one == 1, "brute force: " + std::to_string(at_one) + " guesses at rho = 1");
    if (v.pass) v.detail = "rho = " + fmt("%.15f", r.max_abs_rho[key]) + ", runner-up " + fmt("%.3f", runner_up);
    return v;
}

// 5. first-order CPA on the masked design fails for every descriptor
Verdict masked_cpa() {
    const Schedule s = build_schedule(Design::Masked, Profile::Rolled);
    std::vector<std::set<std::pair<int, int>>> fps;
    std::string detail;
    for (std::uint64_t seed : {1ULL, 2ULL}) {
        std::vector<std::uint8_t> pts(100000);
        auto r = substream(seed, 0, stream::kPlaintext);
        for (auto& p : pts) p = std::uint8_t(r());
        SimOptions o;
        o.model = LeakageModel::Value;
        o.noise = {1.0, seed};
        o.jobs = jobs_available();
        const auto res = cpa_sweep(simulate_traces(s, pts, 0x2B, o), jobs_available());
        std::set<std::pair<int, int>> f;
        for (const CpaResult& c : res)
            if (c.success) f.emplace(c.descriptor_id, int(c.model));
        detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": " + std::to_string(f.size()) + "/" +
                  std::to_string(res.size()) + " false positives";
        for (const auto& [id, m] : f) detail += " [#" + std::to_string(id) + " " + std::string(to_string(LeakageModel(m))) + "]";
        fps.push_back(std::move(f));
    }
    Verdict v;
    v.require(fps[0].size() <= 2 && fps[1].size() <= 2, "too many false positives");
    std::set<int> first;
    for (const auto& f : fps[0]) first.insert(f.first);
    for (const auto& f : fps[1]) v.require(!first.count(f.first), "descriptor " + std::to_string(f.first) + " repeats");
    v.detail = detail + (v.pass ? "" : "; " + v.detail);
    return v;
}

TTestResult tvla(Design d, LeakageModel m, bool glitch) {
    FixedVsRandomOptions o;
    o.n_per_set = 20000;
    o.sim.model = m;
    o.sim.glitch = glitch;
    o.sim.noise = {1.0, 7};
    o.sim.jobs = jobs_available();
    return fixed_vs_random_campaign(build_schedule(d, Profile::Rolled), o);
}

// 6. the masked design leaks only through glitches
Verdict glitch_tvla() {
    const TTestResult off = tvla(Design::Masked, LeakageModel::Value, false);
    const TTestResult on = tvla(Design::Masked, LeakageModel::Value, true);
    Verdict v;
    v.require(on.max_abs_t > kTvlaThreshold, "glitch on below threshold");
    v.require(off.max_abs_t < kTvlaThreshold, "glitch off above threshold");
    v.detail = "max|t| glitch on " + fmt("%.2f", on.max_abs_t) + ", off " + fmt("%.2f", off.max_abs_t) + (v.pass ? "" : "; " + v.detail);
    return v;
}

// 7. unprotected and hiding designs leak in the HW model
Verdict unprotected_tvla() {
    const TTestResult u = tvla(Design::UHLS, LeakageModel::HW, false);
    const TTestResult c = tvla(Design::CNG, LeakageModel::HW, false);
    Verdict v;
    v.require(u.max_abs_t > kTvlaThreshold, "UHLS below threshold");
    v.require(c.max_abs_t > kTvlaThreshold, "CNG below threshold");
    v.detail = "max|t| UHLS " + fmt("%.2f", u.max_abs_t) + ", CNG " + fmt("%.2f", c.max_abs_t) + (v.pass ? "" : "; " + v.detail);
    return v;
}

// 8. statistical sample sizing
Verdict sample_sizing() {
    Verdict v;
    const std::size_t n = sample_size(std::nullopt, 0.01, 0.99, 0.5);
    v.require(n == 16587, "unbounded n = " + std::to_string(n));
    std::size_t prev = 0;
    for (double N = 1; N <= 1e7; N = N < 5000 ? N + 1 : std::floor(N * 1.01)) {
        const std::size_t s = sample_size(N, 0.01, 0.99, 0.5);
        v.require(prev <= s, "not monotone at N = " + fmt("%.0f", N));
        prev = s;
    }
    if (v.pass) v.detail = "n = 16587, monotone over N in [1, 1e7]";
    return v;
}

// 9. SBF outcome partition and the hiding design's detection properties
Verdict fi_properties() {
    Verdict v;
    std::map<Profile, double> uhls_critical;
    std::string detail;
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            const CampaignReport r = run_sbf_campaign(s, make_stimuli(d, 8, 1), 1, jobs_available());
            const std::string cell = std::string(to_string(d)) + "/" + std::string(to_string(p));
            const double sum = std::accumulate(r.rates.begin(), r.rates.end(), 0.0);
            v.require(std::abs(sum - 1.0) <= 1e-9, cell + " rates sum to " + fmt("%.12f", sum));
            const auto detected = r.counts[std::size_t(Outcome::Detected)];
            if (d == Design::CNG) {
                const auto& shared = r.by_slice[std::size_t(SliceClass::Shared)];
                v.require(shared[std::size_t(Outcome::Critical)] == 0, cell + " shared-register Critical");
                detail += " " + cell + " D=" + fmt("%.3f", r.rates[std::size_t(Outcome::Detected)]);
            } else {
                v.require(detected == 0, cell + " has Detected outcomes");
            }
            if (d == Design::UHLS) uhls_critical[p] = r.rates[std::size_t(Outcome::Critical)];
        }
    v.require(uhls_critical[Profile::Unrolled] > uhls_critical[Profile::Rolled], "Unrolled UHLS not more critical than Rolled");
    v.detail = "UHLS Critical Rolled " + fmt("%.3f", uhls_critical[Profile::Rolled]) + " < Unrolled " +
               fmt("%.3f", uhls_critical[Profile::Unrolled]) + ";" + detail + (v.pass ? "" : "; " + v.detail);
    return v;
}

// 10. numerical kernels against naive oracles
Verdict kernels() {
    Verdict v;
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    double worst = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const int n = 3 + int(rng() % 30), ns = 1 + int(rng() % 5), nk = 1 + int(rng() % 4);
        Eigen::MatrixXd x(n, ns), h(n, nk);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = g(rng);
        const Eigen::MatrixXd r = pearson(x, h);
        for (int k = 0; k < nk; ++k)
            for (int c = 0; c < ns; ++c) {
                std::vector<double> hx(h.col(k).data(), h.col(k).data() + n), xx(x.col(c).data(), x.col(c).data() + n);
                worst = std::max(worst, std::abs(r(k, c) - oracle::pearson(hx, xx)));
            }
        SampleMatrix a(n, ns), b(n + 2, ns);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = float(g(rng));
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = float(g(rng) + 0.2);
        const TTestResult t = welch_ttest(a, b);
        for (int c = 0; c < ns; ++c) {
            std::vector<double> va, vb;
            for (int i = 0; i < a.rows(); ++i) va.push_back(a(i, c));
            for (int i = 0; i < b.rows(); ++i) vb.push_back(b(i, c));
            worst = std::max(worst, std::abs(t.t[std::size_t(c)] - oracle::welch(va, vb)));
        }
    }
    v.require(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
    SampleMatrix a(5, 1), b(5, 1);
    for (int i = 0; i < 5; ++i) a(i, 0) = float(i + 1), b(i, 0) = float(i + 2);
    const double t = welch_ttest(a, b).t[0];
    v.require(std::abs(t + 1.0) <= 1e-12, "Welch example t = " + fmt("%.15f", t));
    if (v.pass) v.detail = "max deviation " + fmt("%.2g", worst) + ", Welch example t = " + fmt("%.15f", t);
    return v;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) {
            std::ifstream f(e.path(), std::ios::binary);
            std::ostringstream s;
            s << f.rdbuf();
            out[fs::relative(e.path(), dir).string()] = s.str();
        }
    return out;
}

// 11. every command is byte-identical at 1, 4 and 16 workers
Verdict determinism() {
    CampaignConfig c;
    c.seed = 11;
    c.n_traces = 4000;
    c.ttest_n_per_set = 2000;
    c.fi_margin = 0.05;
    c.fi_confidence = 0.95;
    c.sbf_inputs = 2;
    c.multiplicities = {2, 5};
    c.top_k = 2;
    const fs::path root = fs::temp_directory_path() / "sboxbench_acceptance_determinism";
    fs::remove_all(root);
    Verdict v;
    std::size_t files = 0;
    for (Design d : kDesigns) {
        std::map<std::string, std::string> reference;
        for (int jobs : {1, 4, 16}) {
            CampaignConfig cfg = c;
            cfg.design = d;
            cfg.profile = d == Design::Masked ? Profile::Modular : Profile::Rolled;
            cfg.model = d == Design::Masked ? LeakageModel::Value : LeakageModel::HD;
            cfg.glitch = d == Design::Masked;
            cfg.fi_designs = {d};
            cfg.fi_profiles = {Profile::Unrolled, Profile::Modular};
            cfg.out_dir = (root / (std::string(to_string(d)) + "_j" + std::to_string(jobs))).string();
            const RunContext ctx{jobs, nullptr};
            cmd_gen_traces(cfg, ctx);
            cmd_cpa(cfg, ctx);
            cmd_ttest(cfg, ctx);
            cmd_fi(cfg, ctx);
            cmd_report(cfg, ctx);
            auto snap = snapshot(cfg.out_dir);
            if (jobs == 1) {
                reference = std::move(snap);
                files += reference.size();
            } else {
                v.require(snap == reference, std::string(to_string(d)) + " differs at --jobs " + std::to_string(jobs));
            }
        }
    }
    fs::remove_all(root);
    if (v.pass) v.detail = "5 commands x 3 designs, " + std::to_string(files) + " files identical at jobs 1/4/16";
    return v;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"FIPS-197 equivalence", fips_equivalence},
        {"field oracles", field_oracles},
        {"masking first-order soundness", masking_soundness},
        {"CPA soundness", cpa_soundness},
        {"masked CPA resists", masked_cpa},
        {"glitch t-test", glitch_tvla},
        {"TVLA UHLS and CNG", unprotected_tvla},
        {"sample sizing", sample_sizing},
        {"FI partition and CNG", fi_properties},
        {"numerical kernels", kernels},
        {"determinism", determinism},
    };
    double suite = 0;
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (i == 0) v.require(secs < 5.0, "took " + fmt("%.2f", secs) + " s (limit 5 s)");
        if (i == 2) v.require(secs < 600.0, "took " + fmt("%.1f", secs) + " s (limit 600 s)");
        if (i < 10) suite += secs;
        failed += !v.pass;
        std::printf("[%s] %2zu. %-32s %7.2f s  %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs, v.detail.c_str());
        std::fflush(stdout);
    }
    const bool fast = suite < 1800;
    failed += !fast;
    std::printf("[%s]     %-32s %7.2f s  criteria 1-10 under 30 minutes\n", fast ? "PASS" : "FAIL", "desk-scale suite time", suite);
    return failed ? 1 : 0;
}
