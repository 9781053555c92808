#include "sboxbench/reporting.hpp"

#include "sboxbench/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sboxbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument("config: " + what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) bad(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
            bad("unknown key '" + where + it.key() + "'");
}

std::uint64_t get_u64(const json& v, const std::string& name) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return std::uint64_t(v.get<std::int64_t>());
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        std::uint64_t out = 0;
        const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
        const char* b = s.data() + (hex ? 2 : 0);
        auto [p, ec] = std::from_chars(b, s.data() + s.size(), out, hex ? 16 : 10);
        if (ec == std::errc() && p == s.data() + s.size() && b != p) return out;
    }
    bad(name + " must be a non-negative integer");
}

std::uint8_t get_byte(const json& v, const std::string& name) {
    const std::uint64_t x = get_u64(v, name);
    if (x > 0xFF) bad(name + " must fit in a byte");
    return std::uint8_t(x);
}

double get_double(const json& v, const std::string& name) {
    if (!v.is_number()) bad(name + " must be a number");
    return v.get<double>();
}

std::string get_string(const json& v, const std::string& name) {
    if (!v.is_string()) bad(name + " must be a string");
    return v.get<std::string>();
}

Design get_design(const json& v) {
    auto d = parse_design(get_string(v, "design"));
    if (!d) bad("unknown design '" + v.get<std::string>() + "'");
    return *d;
}

Profile get_profile(const json& v) {
    auto p = parse_profile(get_string(v, "profile"));
    if (!p) bad("unknown profile '" + v.get<std::string>() + "'");
    return *p;
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::uint64_t seed_of(const CampaignConfig& c) {
    if (!c.seed) throw std::invalid_argument("config: seed is mandatory (set \"seed\" or pass --seed)");
    return *c.seed;
}

SimOptions sim_options(const CampaignConfig& c, int jobs) {
    SimOptions o;
    o.model = c.model;
    o.noise = {c.sigma, seed_of(c)};
    o.glitch = c.glitch;
    o.fake_policy = c.fake_policy;
    o.fake_key = c.fake_key;
    o.jobs = jobs;
    return o;
}

json outcome_counts(const std::array<std::uint64_t, kOutcomeCount>& counts) {
    json j = json::object();
    for (int o = 0; o < kOutcomeCount; ++o) j[std::string(to_string(Outcome(o)))] = counts[std::size_t(o)];
    return j;
}

std::string cpa_stem(const CpaResult& r) {
    return "cpa_d" + std::to_string(r.descriptor_id) + "_" + std::string(to_string(r.model));
}

double leakiness(const CpaResult& r) { return r.max_abs_rho[std::size_t(r.best_key)]; }

} // namespace

CampaignConfig parse_config(const json& j) {
    check_keys(j, {"design", "profile", "model", "sigma", "glitch", "n_traces", "seed", "key", "fake_key",
                   "fake_key_policy", "ttest", "fi", "cpa", "out"}, "");
    CampaignConfig c;
    if (j.contains("design")) c.design = get_design(j["design"]);
    if (j.contains("profile")) c.profile = get_profile(j["profile"]);
    if (j.contains("model")) {
        auto m = parse_model(get_string(j["model"], "model"));
        if (!m) bad("unknown model '" + j["model"].get<std::string>() + "'");
        c.model = *m;
    }
    if (j.contains("sigma")) c.sigma = get_double(j["sigma"], "sigma");
    if (j.contains("glitch")) {
        if (!j["glitch"].is_boolean()) bad("glitch must be a boolean");
        c.glitch = j["glitch"].get<bool>();
    }
    if (j.contains("n_traces")) c.n_traces = get_u64(j["n_traces"], "n_traces");
    if (j.contains("seed")) c.seed = get_u64(j["seed"], "seed");
    if (j.contains("key")) c.key = get_byte(j["key"], "key");
    if (j.contains("fake_key") && !j["fake_key"].is_null()) c.fake_key = get_byte(j["fake_key"], "fake_key");
    if (j.contains("fake_key_policy")) {
        const std::string p = get_string(j["fake_key_policy"], "fake_key_policy");
        if (p == "fixed") c.fake_policy = FakeKeyPolicy::Fixed;
        else if (p == "per_trace") c.fake_policy = FakeKeyPolicy::PerTrace;
        else bad("fake_key_policy must be 'fixed' or 'per_trace'");
    }
    if (j.contains("ttest")) {
        const json& t = j["ttest"];
        check_keys(t, {"n_per_set", "fixed_input"}, "ttest.");
        if (t.contains("n_per_set")) c.ttest_n_per_set = get_u64(t["n_per_set"], "ttest.n_per_set");
        if (t.contains("fixed_input")) c.fixed_input = get_byte(t["fixed_input"], "ttest.fixed_input");
    }
    if (j.contains("fi")) {
        const json& f = j["fi"];
        check_keys(f, {"margin", "confidence", "multiplicities", "sbf_inputs", "designs", "profiles"}, "fi.");
        if (f.contains("margin")) c.fi_margin = get_double(f["margin"], "fi.margin");
        if (f.contains("confidence")) c.fi_confidence = get_double(f["confidence"], "fi.confidence");
        if (f.contains("multiplicities")) {
            if (!f["multiplicities"].is_array()) bad("fi.multiplicities must be an array");
            c.multiplicities.clear();
            for (const json& m : f["multiplicities"]) c.multiplicities.push_back(int(get_u64(m, "fi.multiplicities")));
        }
        if (f.contains("sbf_inputs")) c.sbf_inputs = get_u64(f["sbf_inputs"], "fi.sbf_inputs");
        if (f.contains("designs")) {
            if (!f["designs"].is_array()) bad("fi.designs must be an array");
            c.fi_designs.clear();
            for (const json& d : f["designs"]) c.fi_designs.push_back(get_design(d));
        }
        if (f.contains("profiles")) {
            if (!f["profiles"].is_array()) bad("fi.profiles must be an array");
            c.fi_profiles.clear();
            for (const json& p : f["profiles"]) c.fi_profiles.push_back(get_profile(p));
        }
    }
    if (j.contains("cpa")) {
        const json& a = j["cpa"];
        check_keys(a, {"top_k", "trace_file"}, "cpa.");
        if (a.contains("top_k")) c.top_k = get_u64(a["top_k"], "cpa.top_k");
        if (a.contains("trace_file")) c.trace_file = get_string(a["trace_file"], "cpa.trace_file");
    }
    if (j.contains("out")) c.out_dir = get_string(j["out"], "out");
    validate(c);
    return c;
}

CampaignConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

json config_json(const CampaignConfig& c) {
    json j;
    j["design"] = to_string(c.design);
    j["profile"] = to_string(c.profile);
    j["model"] = to_string(c.model);
    j["sigma"] = c.sigma;
    j["glitch"] = c.glitch;
    j["n_traces"] = c.n_traces;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    j["key"] = c.key;
    j["fake_key"] = c.fake_key ? json(*c.fake_key) : json(nullptr);
    j["fake_key_policy"] = c.fake_policy == FakeKeyPolicy::Fixed ? "fixed" : "per_trace";
    j["ttest"] = {{"n_per_set", c.ttest_n_per_set}, {"fixed_input", c.fixed_input}};
    json designs = json::array(), profiles = json::array();
    for (Design d : c.fi_designs) designs.push_back(to_string(d));
    for (Profile p : c.fi_profiles) profiles.push_back(to_string(p));
    j["fi"] = {{"margin", c.fi_margin}, {"confidence", c.fi_confidence}, {"multiplicities", c.multiplicities},
               {"sbf_inputs", c.sbf_inputs}, {"designs", designs}, {"profiles", profiles}};
    j["cpa"] = {{"top_k", c.top_k}, {"trace_file", c.trace_file}};
    return j;
}

void validate(const CampaignConfig& c) {
    if (!(c.sigma >= 0)) bad("sigma must be >= 0");
    if (c.glitch && c.design != Design::Masked) bad("glitch mode needs the Masked design");
    if (c.n_traces < 2) bad("n_traces must be >= 2");
    if (c.ttest_n_per_set < 100) bad("ttest.n_per_set must be >= 100");
    if (!(c.fi_margin > 0 && c.fi_margin < 1)) bad("fi.margin must be in (0, 1)");
    if (c.fi_confidence != 0.90 && c.fi_confidence != 0.95 && c.fi_confidence != 0.99)
        bad("fi.confidence must be 0.90, 0.95 or 0.99");
    for (int m : c.multiplicities)
        if (m < 2 || m > 5) bad("fi.multiplicities must be in 2..5");
    if (c.sbf_inputs < 1) bad("fi.sbf_inputs must be >= 1");
    if (c.fi_designs.empty() || c.fi_profiles.empty()) bad("fi.designs and fi.profiles must be non-empty");
    if (c.out_dir.empty()) bad("out must be non-empty");
}

void apply_desk(CampaignConfig& c) {
    c.n_traces = 20000;
    c.ttest_n_per_set = 20000;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const CampaignConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config_json(c).dump())));
    return buf;
}

json provenance(const CampaignConfig& c) {
    return {{"tool", "sboxbench"}, {"version", kToolVersion}, {"config_hash", config_hash(c)},
            {"seed", seed_of(c)}, {"config", config_json(c)}};
}

json to_json(const CampaignReport& r) {
    json j;
    j["design"] = to_string(r.design);
    j["profile"] = to_string(r.profile);
    j["campaign"] = r.multiplicity == 1 ? "SBF" : "MBF";
    j["multiplicity"] = r.multiplicity;
    j["samples"] = r.samples;
    j["population"] = r.population;
    j["margin"] = r.margin;
    j["confidence"] = r.confidence;
    j["seed"] = r.seed;
    j["counts"] = outcome_counts(r.counts);
    json rates = json::object();
    for (int o = 0; o < kOutcomeCount; ++o) rates[std::string(to_string(Outcome(o)))] = r.rates[std::size_t(o)];
    j["rates"] = rates;
    j["would_be_critical"] = r.would_be_critical;
    if (r.multiplicity == 1) {
        json slices = json::object(), kinds = json::object();
        for (int s = 0; s < 3; ++s) slices[std::string(to_string(SliceClass(s)))] = outcome_counts(r.by_slice[std::size_t(s)]);
        for (int k = 0; k < 3; ++k) kinds[std::string(to_string(RegisterKind(k)))] = outcome_counts(r.by_kind[std::size_t(k)]);
        j["by_slice"] = slices;
        j["by_register_kind"] = kinds;
    }
    return j;
}

json to_json(const CpaResult& r, const IntermediateDescriptor& d) {
    return {{"id", r.descriptor_id}, {"label", d.label}, {"function", to_string(d.function)},
            {"model", to_string(r.model)}, {"best_key", r.best_key}, {"best_sample_index", r.best_sample_index},
            {"rank_of_true_key", r.rank_of_true_key}, {"max_abs_rho", leakiness(r)}, {"success", r.success}};
}

json to_json(const TTestResult& r) {
    std::size_t degenerate = 0;
    for (bool d : r.degenerate) degenerate += d;
    return {{"max_abs_t", r.max_abs_t}, {"max_index", r.max_index}, {"leaky", r.leaky},
            {"threshold", kTvlaThreshold}, {"degenerate_samples", degenerate}, {"t", r.t}};
}

void write_cpa_csv(std::ostream& out, const std::vector<CpaResult>& results, const std::vector<IntermediateDescriptor>& desc) {
    out << "id,label,function,model,best_key,rank,max_abs_rho,success\n";
    for (const CpaResult& r : results) {
        const IntermediateDescriptor& d = desc.at(std::size_t(r.descriptor_id));
        out << r.descriptor_id << ',' << d.label << ',' << to_string(d.function) << ',' << to_string(r.model) << ','
            << r.best_key << ',' << r.rank_of_true_key << ',' << num(leakiness(r)) << ',' << (r.success ? "true" : "false")
            << '\n';
    }
}

void write_rate_table(std::ostream& out, const std::vector<CampaignReport>& reports, const std::vector<int>& multiplicities) {
    std::vector<int> cols{1};
    cols.insert(cols.end(), multiplicities.begin(), multiplicities.end());
    out << "design,profile";
    for (int m : cols)
        for (int o = 0; o < kOutcomeCount; ++o)
            out << ',' << (m == 1 ? std::string("SBF") : "m" + std::to_string(m)) << '_' << to_string(Outcome(o));
    out << '\n';
    std::vector<std::pair<Design, Profile>> rows;
    for (const CampaignReport& r : reports)
        if (std::find(rows.begin(), rows.end(), std::pair(r.design, r.profile)) == rows.end()) rows.emplace_back(r.design, r.profile);
    for (const auto& [d, p] : rows) {
        out << to_string(d) << ',' << to_string(p);
        for (int m : cols) {
            auto it = std::find_if(reports.begin(), reports.end(), [&](const CampaignReport& r) {
                return r.design == d && r.profile == p && r.multiplicity == m;
            });
            for (int o = 0; o < kOutcomeCount; ++o) out << ',' << (it == reports.end() ? "" : num(it->rates[std::size_t(o)]));
        }
        out << '\n';
    }
}

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, const std::vector<double>& hlines) {
    constexpr double W = 800, H = 420, L = 70, R = 20, T = 40, B = 50;
    std::size_t n = 0;
    double lo = 0, hi = 0;
    bool any = false;
    auto widen = [&](double v) {
        if (!any) lo = hi = v, any = true;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (const PlotSeries& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y) widen(v);
    }
    for (double v : hlines) widen(v);
    if (!any) lo = -1, hi = 1;
    if (hi - lo < 1e-12) lo -= 1, hi += 1;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto X = [&](double i) { return L + (n > 1 ? i / double(n - 1) : 0.5) * (W - L - R); };
    auto Y = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' '
      << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4;
        o << "<text x=\"" << L - 6 << "\" y=\"" << fixed2(Y(v) + 4) << "\" text-anchor=\"end\">" << num(double(float(v)))
          << "</text>\n";
    }
    o << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">0</text>\n";
    o << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << (n ? n - 1 : 0) << "</text>\n";
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
    for (double v : hlines)
        o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << fixed2(Y(v)) << "\" y2=\"" << fixed2(Y(v))
          << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
    for (const PlotSeries& s : series) {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width << "\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) o << (i ? " " : "") << fixed2(X(double(i))) << ',' << fixed2(Y(s.y[i]));
        o << "\"><title>" << s.name << "</title></polyline>\n";
    }
    o << "</svg>\n";
    return o.str();
}

TraceMatrix simulate_from_config(const CampaignConfig& c, int jobs) {
    validate(c);
    const Schedule s = build_schedule(c.design, c.profile);
    std::vector<std::uint8_t> pts(c.n_traces);
    auto rng = substream(seed_of(c), 0, stream::kPlaintext);
    for (auto& p : pts) p = std::uint8_t(rng());
    return simulate_traces(s, pts, c.key, sim_options(c, jobs));
}

void cmd_gen_traces(const CampaignConfig& c, const RunContext& ctx) {
    const TraceMatrix t = simulate_from_config(c, ctx.jobs);
    const fs::path dir(c.out_dir);
    fs::create_directories(dir);
    save_trc((dir / "traces.trc").string(), t);
    json j = provenance(c);
    j["n_traces"] = t.n_traces();
    j["n_samples"] = t.n_samples();
    j["file"] = "traces.trc";
    write_json(dir / "gen_traces.json", j);
    if (auto* log = ctx.log)
        *log << "gen-traces: " << to_string(c.design) << '/' << to_string(c.profile) << ' ' << to_string(c.model)
             << (c.glitch ? " glitch" : "") << ", " << t.n_traces() << " traces x " << t.n_samples() << " samples -> "
             << (dir / "traces.trc").string() << '\n';
}

void cmd_cpa(const CampaignConfig& c, const RunContext& ctx) {
    const TraceMatrix t = c.trace_file.empty() ? simulate_from_config(c, ctx.jobs) : load_trc(c.trace_file);
    const std::vector<CpaResult> results = cpa_sweep(t, ctx.jobs);
    const auto desc = enumerate_intermediates(t.design);
    const fs::path dir(c.out_dir);

    std::ostringstream csv;
    write_cpa_csv(csv, results, desc);
    write_file(dir / "cpa_results.csv", csv.str());

    std::size_t successes = 0;
    json rows = json::array();
    for (const CpaResult& r : results) {
        successes += r.success;
        rows.push_back(to_json(r, desc.at(std::size_t(r.descriptor_id))));
    }

    // top-k by the strongest correlation any key guess reached; ties by sweep order
    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return leakiness(results[a]) > leakiness(results[b]); });
    order.resize(std::min(order.size(), c.top_k));

    const Schedule s = build_schedule(t.design, t.profile);
    const BinnedTraces bins(t);
    json plots = json::array();
    for (std::size_t i : order) {
        const CpaResult& r = results[i];
        const HypothesisTable h(s, r.model, ctx.jobs);
        const Eigen::MatrixXd rho = bins.correlation(h, std::size_t(r.descriptor_id));
        std::ostringstream data;
        data << "sample";
        for (int k = 0; k < 256; ++k) data << ",k" << k;
        data << '\n';
        for (Eigen::Index col = 0; col < rho.cols(); ++col) {
            data << col;
            for (int k = 0; k < 256; ++k) data << ',' << num(rho(k, col));
            data << '\n';
        }
        std::vector<PlotSeries> series;
        for (int k = 0; k < 256; ++k) {
            if (k == bins.true_key()) continue;
            PlotSeries p{"key " + std::to_string(k), {}, "#bbbbbb", 0.5};
            for (Eigen::Index col = 0; col < rho.cols(); ++col) p.y.push_back(rho(k, col));
            series.push_back(std::move(p));
        }
        PlotSeries truth{"true key " + std::to_string(bins.true_key()), {}, "#d62728", 1.5};
        for (Eigen::Index col = 0; col < rho.cols(); ++col) truth.y.push_back(rho(bins.true_key(), col));
        series.push_back(std::move(truth));

        const std::string stem = cpa_stem(r);
        const auto& d = desc.at(std::size_t(r.descriptor_id));
        write_file(dir / "plots" / (stem + ".csv"), data.str());
        write_file(dir / "plots" / (stem + ".svg"),
                   svg_line_plot("CPA " + std::string(to_string(r.model)) + " on #" + std::to_string(r.descriptor_id) + " " +
                                     d.label,
                                 "sample", "correlation", series));
        plots.push_back("plots/" + stem + ".svg");
    }

    json j = provenance(c);
    j["traces"] = {{"design", to_string(t.design)}, {"profile", to_string(t.profile)}, {"model", to_string(t.model)},
                   {"glitch", t.glitch}, {"n_traces", t.n_traces()}, {"n_samples", t.n_samples()},
                   {"sigma", t.sigma}, {"seed", t.seed}};
    j["descriptors"] = desc.size();
    j["attacks"] = results.size();
    j["successes"] = successes;
    j["plots"] = plots;
    j["results"] = rows;
    write_json(dir / "cpa.json", j);
    if (auto* log = ctx.log)
        *log << "cpa: " << results.size() << " attacks (" << desc.size() << " descriptors x HW/HD) on " << t.n_traces()
             << " traces, " << successes << " successful -> " << (dir / "cpa_results.csv").string() << '\n';
}

void cmd_ttest(const CampaignConfig& c, const RunContext& ctx) {
    validate(c);
    const Schedule s = build_schedule(c.design, c.profile);
    FixedVsRandomOptions opt;
    opt.n_per_set = c.ttest_n_per_set;
    opt.sim = sim_options(c, ctx.jobs);
    opt.fixed_input = c.fixed_input;
    opt.key = c.key;
    const TTestResult r = fixed_vs_random_campaign(s, opt);
    const fs::path dir(c.out_dir);

    std::ostringstream csv;
    csv << "sample,t,upper,lower,degenerate\n";
    for (std::size_t i = 0; i < r.t.size(); ++i)
        csv << i << ',' << num(r.t[i]) << ',' << num(kTvlaThreshold) << ',' << num(-kTvlaThreshold) << ','
            << (r.degenerate[i] ? 1 : 0) << '\n';
    write_file(dir / "ttest_curve.csv", csv.str());
    write_file(dir / "ttest.svg",
               svg_line_plot("Fixed vs random t-test, " + std::string(to_string(c.design)) + " " +
                                 std::string(to_string(c.profile)) + (c.glitch ? " (glitch)" : ""),
                             "sample", "t", {PlotSeries{"t", r.t, "#1f77b4", 1.0}}, {kTvlaThreshold, -kTvlaThreshold}));

    json j = provenance(c);
    j["n_per_set"] = c.ttest_n_per_set;
    j["fixed_input"] = c.fixed_input;
    j.update(to_json(r));
    write_json(dir / "ttest.json", j);
    if (auto* log = ctx.log)
        *log << "ttest: " << to_string(c.design) << '/' << to_string(c.profile) << ' ' << to_string(c.model)
             << (c.glitch ? " glitch" : "") << ", " << c.ttest_n_per_set << "+" << c.ttest_n_per_set
             << " traces, max|t| = " << num(r.max_abs_t) << " at sample " << r.max_index
             << (r.leaky ? " (leaky)" : " (below threshold)") << '\n';
}

void cmd_fi(const CampaignConfig& c, const RunContext& ctx) {
    validate(c);
    const std::uint64_t seed = seed_of(c);
    std::vector<CampaignReport> reports;
    for (Design d : c.fi_designs)
        for (Profile p : c.fi_profiles) {
            const Schedule s = build_schedule(d, p);
            reports.push_back(run_sbf_campaign(s, make_stimuli(d, c.sbf_inputs, seed), seed, ctx.jobs));
            for (int m : c.multiplicities)
                reports.push_back(run_mbf_campaign(s, {m, c.fi_margin, c.fi_confidence, seed, ctx.jobs}));
            if (auto* log = ctx.log) {
                *log << "fi: " << to_string(d) << '/' << to_string(p);
                for (const CampaignReport& r : reports)
                    if (r.design == d && r.profile == p)
                        *log << "  " << (r.multiplicity == 1 ? std::string("SBF") : "m" + std::to_string(r.multiplicity))
                             << " C=" << num(r.rates[1]) << " H=" << num(r.rates[2]) << " D=" << num(r.rates[3]);
                *log << '\n';
            }
        }
    const fs::path dir(c.out_dir);
    std::ostringstream csv;
    write_rate_table(csv, reports, c.multiplicities);
    write_file(dir / "fi_rates.csv", csv.str());
    json j = provenance(c);
    json cells = json::array();
    for (const CampaignReport& r : reports) cells.push_back(to_json(r));
    j["sbf_inputs"] = c.sbf_inputs;
    j["reports"] = cells;
    write_json(dir / "fi_report.json", j);
}

void cmd_report(const CampaignConfig& c, const RunContext& ctx) {
    const fs::path dir(c.out_dir);
    std::ostringstream md;
    bool any = false;
    auto load = [&](const char* name) -> std::optional<json> {
        if (!fs::exists(dir / name)) return std::nullopt;
        any = true;
        try {
            return json::parse(read_file(dir / name));
        } catch (const json::parse_error& e) {
            throw std::runtime_error((dir / name).string() + ": " + e.what());
        }
    };
    auto cfg_line = [](const json& j) {
        return "config " + j.at("config_hash").get<std::string>() + ", seed " + std::to_string(j.at("seed").get<std::uint64_t>()) +
               ", sboxbench " + j.at("version").get<std::string>();
    };
    md << "# sboxbench report\n";
    if (auto j = load("gen_traces.json")) {
        const json& cfg = j->at("config");
        md << "\n## Traces\n\n" << cfg.at("design").get<std::string>() << " / " << cfg.at("profile").get<std::string>()
           << ", model " << cfg.at("model").get<std::string>() << ", " << j->at("n_traces") << " traces x "
           << j->at("n_samples") << " samples (" << cfg_line(*j) << ")\n";
    }
    if (auto j = load("cpa.json")) {
        const json& t = j->at("traces");
        md << "\n## CPA\n\n" << t.at("design").get<std::string>() << " / " << t.at("profile").get<std::string>() << ", "
           << t.at("model").get<std::string>() << " traces, n = " << t.at("n_traces") << ": " << j->at("successes")
           << " of " << j->at("attacks") << " attacks recover the key (" << cfg_line(*j) << ")\n\n";
        md << "| id | label | model | rank | max abs rho |\n|---|---|---|---|---|\n";
        for (const json& r : j->at("results"))
            if (r.at("success").get<bool>())
                md << "| " << r.at("id") << " | " << r.at("label").get<std::string>() << " | "
                   << r.at("model").get<std::string>() << " | " << r.at("rank_of_true_key") << " | "
                   << num(r.at("max_abs_rho").get<double>()) << " |\n";
    }
    if (auto j = load("ttest.json")) {
        const json& cfg = j->at("config");
        md << "\n## Fixed vs random t-test\n\n" << cfg.at("design").get<std::string>() << " / "
           << cfg.at("profile").get<std::string>() << ", " << cfg.at("model").get<std::string>()
           << (cfg.at("glitch").get<bool>() ? ", glitch" : "") << ", " << j->at("n_per_set")
           << " traces per set: max|t| = " << num(j->at("max_abs_t").get<double>()) << " at sample "
           << j->at("max_index") << ", " << (j->at("leaky").get<bool>() ? "leaky" : "not leaky") << " ("
           << cfg_line(*j) << ")\n";
    }
    if (auto j = load("fi_report.json")) {
        md << "\n## Fault injection\n\n" << cfg_line(*j) << "\n\n| design | profile | campaign | samples";
        for (int o = 0; o < kOutcomeCount; ++o) md << " | " << to_string(Outcome(o));
        md << " | would-be critical |\n|---|---|---|---|---|---|---|---|---|\n";
        for (const json& r : j->at("reports")) {
            md << "| " << r.at("design").get<std::string>() << " | " << r.at("profile").get<std::string>() << " | "
               << (r.at("multiplicity").get<int>() == 1 ? std::string("SBF") : "m" + std::to_string(r.at("multiplicity").get<int>()))
               << " | " << r.at("samples");
            for (int o = 0; o < kOutcomeCount; ++o)
                md << " | " << fixed2(100.0 * r.at("rates").at(std::string(to_string(Outcome(o)))).get<double>()) << "%";
            md << " | " << r.at("would_be_critical") << " |\n";
        }
    }
    if (!any) throw std::runtime_error("report: no results in " + dir.string() + " (run gen-traces, cpa, ttest or fi first)");
    write_file(dir / "report.md", md.str());
    if (auto* log = ctx.log) *log << md.str();
}

} // namespace sboxbench
