#include "sboxbench/leakage_sim.hpp"

#include "sboxbench/parallel.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sboxbench {

std::string_view to_string(LeakageModel m) {
    switch (m) {
    case LeakageModel::HW: return "HW";
    case LeakageModel::HD: return "HD";
    case LeakageModel::Value: return "Value";
    }
    return "?";
}

std::optional<LeakageModel> parse_model(std::string_view s) {
    if (s == "HW" || s == "hw") return LeakageModel::HW;
    if (s == "HD" || s == "hd") return LeakageModel::HD;
    if (s == "Value" || s == "value") return LeakageModel::Value;
    return std::nullopt;
}

std::vector<int> glitch_nodes(const Program& prog) {
    std::vector<int> out;
    for (std::size_t i = 0; i < prog.size(); ++i)
        if (prog.nodes[i].glitch) out.push_back(int(i));
    return out;
}

std::size_t sample_count(const Schedule& s, LeakageModel model, bool glitch) {
    if (model != LeakageModel::Value) return std::size_t(s.nominal_latency);
    const Program& prog = s.program();
    return prog.size() + (glitch ? glitch_nodes(prog).size() : 0);
}

MaskSet fresh_masks(std::mt19937_64& rng) {
    const std::uint64_t v = rng();
    return MaskSet::derive(std::uint8_t(v), std::uint8_t((v >> 8) & 0x0F), std::uint8_t((v >> 12) & 0x0F),
                           std::uint8_t((v >> 16) & 0x03));
}

std::uint8_t default_fake_key(std::uint64_t seed) {
    auto rng = substream(seed, 0, stream::kFakeKey);
    return std::uint8_t(rng());
}

std::vector<double> leakage_of(const Schedule& s, const DesignInputs& in, LeakageModel model, bool glitch) {
    if (glitch && s.design != Design::Masked) throw std::invalid_argument("glitch mode needs the masked design");
    const Program& prog = s.program();
    const auto ports = port_values(prog, in);
    std::vector<std::uint32_t> values(prog.size());
    evaluate(prog, ports, values);

    std::vector<double> out;
    out.reserve(sample_count(s, model, glitch));
    if (model == LeakageModel::Value) {
        for (std::uint32_t v : values) out.push_back(double(std::popcount(v)));
        if (glitch)
            for (int n : glitch_nodes(prog)) out.push_back(double(glitch_weight(prog, prog.nodes[std::size_t(n)], ports, values)));
        return out;
    }

    const ExecutionTrace t = execute(s, in, {}, 0, TraceDetail::Events);
    for (const CycleRecord& c : t.cycles) {
        double acc = 0;
        for (const RegisterWrite& w : c.writes)
            acc += std::popcount(model == LeakageModel::HW ? w.new_bits : (w.old_bits ^ w.new_bits));
        if (glitch)
            for (const NodeEvent& e : c.nodes)
                acc += glitch_weight(prog, prog.nodes[std::size_t(e.node)], ports, values);
        out.push_back(acc);
    }
    return out;
}

TraceMatrix simulate_traces(const Schedule& s, std::span<const std::uint8_t> plaintexts, std::uint8_t key,
                            const SimOptions& opt) {
    if (plaintexts.empty()) throw std::invalid_argument("simulate_traces: no plaintexts");
    if (opt.glitch && s.design != Design::Masked) throw std::invalid_argument("glitch mode needs the masked design");
    if (!(opt.noise.sigma >= 0)) throw std::invalid_argument("simulate_traces: sigma must be >= 0");

    TraceMatrix t;
    t.model = opt.model;
    t.design = s.design;
    t.profile = s.profile;
    t.glitch = opt.glitch;
    t.sigma = float(opt.noise.sigma);
    t.seed = opt.noise.seed;
    const std::size_t n = plaintexts.size();
    const std::size_t ns = sample_count(s, opt.model, opt.glitch);
    t.samples.resize(Eigen::Index(n), Eigen::Index(ns));
    t.meta.resize(n);
    const std::uint8_t fixed_fake = opt.fake_key ? *opt.fake_key : default_fake_key(opt.noise.seed);

    parallel_for(n, opt.jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            TraceMeta& m = t.meta[i];
            m.plaintext = plaintexts[i];
            m.key = key;
            if (s.design == Design::CNG) {
                if (opt.fake_policy == FakeKeyPolicy::PerTrace) {
                    auto r = substream(opt.noise.seed, i, stream::kFakeKey);
                    m.fake_key = std::uint8_t(r());
                } else {
                    m.fake_key = fixed_fake;
                }
            }
            if (s.design == Design::Masked) {
                auto r = substream(opt.noise.seed, i, stream::kMasks);
                m.masks = fresh_masks(r);
            }
            const auto leak = leakage_of(s, {m.plaintext, m.key, m.fake_key, m.masks}, opt.model, opt.glitch);
            auto noise = substream(opt.noise.seed, i, stream::kNoise);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t c = 0; c < ns; ++c) {
                const double z = opt.noise.sigma > 0 ? gauss(noise) : 0.0;
                t.samples(Eigen::Index(i), Eigen::Index(c)) = float(leak[c] + opt.noise.sigma * z);
            }
        }
    });
    return t;
}

namespace {

constexpr std::array<char, 4> kMagic{'T', 'R', 'C', '1'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                                     std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    const U u = std::bit_cast<U>(v);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = char((u >> (8 * i)) & 0xFF);
    out.write(buf, sizeof buf);
}

template <class T>
T get(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                                     std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) throw std::runtime_error("TRC1: truncated file");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u = U(u | (U(buf[i]) << (8 * i)));
    return std::bit_cast<T>(u);
}

// model bits 0-1, design bits 2-3, profile bits 4-5, glitch bit 6
std::uint8_t pack_tag(const TraceMatrix& t) {
    return std::uint8_t(unsigned(t.model) | (unsigned(t.design) << 2) | (unsigned(t.profile) << 4) | (t.glitch ? 0x40u : 0u));
}

} // namespace

void write_trc(std::ostream& out, const TraceMatrix& t) {
    out.write(kMagic.data(), kMagic.size());
    put(out, kVersion);
    put(out, std::uint32_t(t.n_traces()));
    put(out, std::uint32_t(t.n_samples()));
    put(out, pack_tag(t));
    put(out, t.sigma);
    put(out, t.seed);
    for (Eigen::Index i = 0; i < t.samples.rows(); ++i)
        for (Eigen::Index c = 0; c < t.samples.cols(); ++c) put(out, t.samples(i, c));
    for (const TraceMeta& m : t.meta)
        for (std::uint8_t b : {m.plaintext, m.key, m.fake_key, m.masks.m_in, m.masks.m4a, m.masks.m4b, m.masks.m2,
                               m.masks.m_in_t, m.masks.m_out})
            put(out, b);
    if (!out) throw std::runtime_error("TRC1: write failed");
}

TraceMatrix read_trc(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("TRC1: bad magic");
    if (get<std::uint16_t>(in) != kVersion) throw std::runtime_error("TRC1: unsupported version");
    const std::uint32_t n = get<std::uint32_t>(in);
    const std::uint32_t ns = get<std::uint32_t>(in);
    const std::uint8_t tag = get<std::uint8_t>(in);
    TraceMatrix t;
    if ((tag & 3u) > 2 || ((tag >> 2) & 3u) > 2 || ((tag >> 4) & 3u) > 2 || (tag & 0x80u))
        throw std::runtime_error("TRC1: bad model tag");
    t.model = LeakageModel(tag & 3u);
    t.design = Design((tag >> 2) & 3u);
    t.profile = Profile((tag >> 4) & 3u);
    t.glitch = (tag & 0x40u) != 0;
    t.sigma = get<float>(in);
    t.seed = get<std::uint64_t>(in);
    if (std::uint64_t(n) * ns > (std::uint64_t(1) << 34)) throw std::runtime_error("TRC1: implausible size");
    t.samples.resize(Eigen::Index(n), Eigen::Index(ns));
    for (Eigen::Index i = 0; i < t.samples.rows(); ++i)
        for (Eigen::Index c = 0; c < t.samples.cols(); ++c) t.samples(i, c) = get<float>(in);
    t.meta.resize(n);
    for (TraceMeta& m : t.meta) {
        m.plaintext = get<std::uint8_t>(in);
        m.key = get<std::uint8_t>(in);
        m.fake_key = get<std::uint8_t>(in);
        m.masks.m_in = get<std::uint8_t>(in);
        m.masks.m4a = get<std::uint8_t>(in);
        m.masks.m4b = get<std::uint8_t>(in);
        m.masks.m2 = get<std::uint8_t>(in);
        m.masks.m_in_t = get<std::uint8_t>(in);
        m.masks.m_out = get<std::uint8_t>(in);
        if (!m.masks.valid()) throw std::runtime_error("TRC1: inconsistent mask metadata");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("TRC1: trailing bytes");
    return t;
}

void save_trc(const std::string& path, const TraceMatrix& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    write_trc(f, t);
}

TraceMatrix load_trc(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_trc(f);
}

} // namespace sboxbench
