#include "fedsc/sigsyn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fedsc/errors.hpp"

namespace fedsc::sigsyn {
namespace {

constexpr double kPi = 3.14159265358979323846;

using cplx = std::complex<double>;

// Unit-average-power baseband symbol sequences, one complex value per time
// index. Linear constellations run at one symbol per sample; the
// phase-continuous schemes are oversampled internally.
std::vector<cplx> gen_bpsk(std::size_t n, RngStream& rng) {
    std::vector<cplx> s(n);
    for (auto& v : s) v = rng.below(2) ? cplx(1.0, 0.0) : cplx(-1.0, 0.0);
    return s;
}

std::vector<cplx> gen_qpsk(std::size_t n, RngStream& rng) {
    std::vector<cplx> s(n);
    for (auto& v : s) {
        const double phase = kPi / 4.0 + kPi / 2.0 * static_cast<double>(rng.below(4));
        v = std::polar(1.0, phase);
    }
    return s;
}

std::vector<cplx> gen_psk8(std::size_t n, RngStream& rng) {
    std::vector<cplx> s(n);
    for (auto& v : s) v = std::polar(1.0, kPi / 4.0 * static_cast<double>(rng.below(8)));
    return s;
}

std::vector<cplx> gen_pam4(std::size_t n, RngStream& rng) {
    static const double levels[4] = {-3.0, -1.0, 1.0, 3.0};
    const double norm = std::sqrt(5.0);  // E[a^2] = 5 over the four levels
    std::vector<cplx> s(n);
    for (auto& v : s) v = cplx(levels[rng.below(4)] / norm, 0.0);
    return s;
}

std::vector<cplx> gen_qam16(std::size_t n, RngStream& rng) {
    static const double levels[4] = {-3.0, -1.0, 1.0, 3.0};
    const double norm = std::sqrt(10.0);  // E[a^2 + b^2] = 10
    std::vector<cplx> s(n);
    for (auto& v : s) v = cplx(levels[rng.below(4)] / norm, levels[rng.below(4)] / norm);
    return s;
}

// CPFSK, modulation index 0.5, 4 samples per symbol.
std::vector<cplx> gen_cpfsk(std::size_t n, RngStream& rng) {
    constexpr std::size_t sps = 4;
    constexpr double h = 0.5;
    std::vector<cplx> s(n);
    double phase = rng.uniform(0.0, 2.0 * kPi);
    double sym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % sps == 0) sym = rng.below(2) ? 1.0 : -1.0;
        s[i] = std::polar(1.0, phase);
        phase += kPi * h * sym / static_cast<double>(sps);
    }
    return s;
}

// GFSK: the +/-1 frequency sequence is smoothed by a Gaussian pulse
// (BT = 0.35, truncated at +/-2 symbols) before phase integration.
std::vector<cplx> gen_gfsk(std::size_t n, RngStream& rng) {
    constexpr std::size_t sps = 4;
    constexpr double h = 0.5;
    constexpr double bt = 0.35;
    constexpr int half = static_cast<int>(2 * sps);

    double taps[2 * half + 1];
    double tap_sum = 0.0;
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * kPi * bt) * static_cast<double>(sps);
    for (int i = -half; i <= half; ++i) {
        const double t = static_cast<double>(i);
        taps[i + half] = std::exp(-0.5 * t * t / (sigma * sigma));
        tap_sum += taps[i + half];
    }
    for (auto& t : taps) t /= tap_sum;

    // Raw instantaneous frequency at sample rate, padded so the filter warms up.
    const std::size_t padded = n + 2 * static_cast<std::size_t>(half);
    std::vector<double> freq_raw(padded);
    double sym = 0.0;
    for (std::size_t i = 0; i < padded; ++i) {
        if (i % sps == 0) sym = rng.below(2) ? 1.0 : -1.0;
        freq_raw[i] = sym;
    }

    std::vector<cplx> s(n);
    double phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        for (int k = -half; k <= half; ++k)
            f += taps[k + half] * freq_raw[i + static_cast<std::size_t>(half + k)];
        s[i] = std::polar(1.0, phase);
        phase += kPi * h * f / static_cast<double>(sps);
    }
    return s;
}

// AM-DSB with a band-limited random message: white Gaussian noise through a
// short moving average, scaled to unit RMS output power.
std::vector<cplx> gen_amdsb(std::size_t n, RngStream& rng) {
    constexpr std::size_t win = 5;
    constexpr double depth = 0.5;
    std::vector<double> raw(n + win - 1);
    for (auto& v : raw) v = rng.normal();

    std::vector<double> msg(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < win; ++k) acc += raw[i + k];
        msg[i] = acc / static_cast<double>(win);
        sq += msg[i] * msg[i];
    }
    const double rms = std::sqrt(sq / static_cast<double>(n));
    const double msg_scale = rms > 0.0 ? depth / rms : 0.0;

    std::vector<cplx> s(n);
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = cplx(1.0 + msg_scale * msg[i], 0.0);
        power += std::norm(s[i]);
    }
    const double norm = std::sqrt(power / static_cast<double>(n));
    for (auto& v : s) v /= norm;
    return s;
}

std::vector<cplx> gen_symbols(Scheme scheme, std::size_t n, RngStream& rng) {
    switch (scheme) {
        case Scheme::Bpsk: return gen_bpsk(n, rng);
        case Scheme::Qpsk: return gen_qpsk(n, rng);
        case Scheme::Psk8: return gen_psk8(n, rng);
        case Scheme::Pam4: return gen_pam4(n, rng);
        case Scheme::Qam16: return gen_qam16(n, rng);
        case Scheme::Cpfsk: return gen_cpfsk(n, rng);
        case Scheme::Gfsk: return gen_gfsk(n, rng);
        case Scheme::AmDsb: return gen_amdsb(n, rng);
    }
    throw SchemeError("unsupported modulation scheme");
}

}  // namespace

Scheme scheme_from_name(const std::string& name) {
    if (name == "bpsk") return Scheme::Bpsk;
    if (name == "qpsk") return Scheme::Qpsk;
    if (name == "8psk") return Scheme::Psk8;
    if (name == "pam4") return Scheme::Pam4;
    if (name == "qam16") return Scheme::Qam16;
    if (name == "cpfsk") return Scheme::Cpfsk;
    if (name == "gfsk") return Scheme::Gfsk;
    if (name == "am_dsb") return Scheme::AmDsb;
    throw SchemeError("unknown modulation scheme: " + name);
}

std::string scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::Bpsk: return "bpsk";
        case Scheme::Qpsk: return "qpsk";
        case Scheme::Psk8: return "8psk";
        case Scheme::Pam4: return "pam4";
        case Scheme::Qam16: return "qam16";
        case Scheme::Cpfsk: return "cpfsk";
        case Scheme::Gfsk: return "gfsk";
        case Scheme::AmDsb: return "am_dsb";
    }
    return "?";
}

const std::vector<Scheme>& default_schemes() {
    static const std::vector<Scheme> schemes{Scheme::Bpsk,  Scheme::Qpsk,  Scheme::Psk8,
                                             Scheme::Pam4,  Scheme::Qam16, Scheme::Cpfsk,
                                             Scheme::Gfsk,  Scheme::AmDsb};
    return schemes;
}

ChannelModel channel_from_name(const std::string& name) {
    if (name == "iid_taps") return ChannelModel::IidTaps;
    if (name == "block") return ChannelModel::Block;
    if (name == "identity") return ChannelModel::Identity;
    throw ConfigError("unknown channel model: " + name);
}

std::string channel_name(ChannelModel model) {
    switch (model) {
        case ChannelModel::IidTaps: return "iid_taps";
        case ChannelModel::Block: return "block";
        case ChannelModel::Identity: return "identity";
    }
    return "?";
}

double SignalSample::energy() const {
    double e = 0.0;
    for (const double v : iq) e += v * v;
    return e;
}

SynthParts synth_signal_parts(Scheme scheme, double snr_db, std::size_t length, RngStream& rng,
                              ChannelModel channel) {
    if (length < 8) throw DimensionError("signal window length must be at least 8");
    if (std::isnan(snr_db)) throw ConfigError("snr_db must be finite or the noiseless sentinel");

    const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
    const double rho = noiseless ? 0.0 : std::pow(10.0, snr_db / 10.0);
    const double amp = noiseless ? 1.0 : std::sqrt(rho);

    std::vector<cplx> sym = gen_symbols(scheme, length, rng);

    // r = sqrt(rho) H s + n with E|h|^2 = 1 and unit-power noise, so the
    // pre-normalization signal-to-noise power ratio is rho.
    std::vector<cplx> faded(length);
    switch (channel) {
        case ChannelModel::Identity:
            for (std::size_t i = 0; i < length; ++i) faded[i] = amp * sym[i];
            break;
        case ChannelModel::Block: {
            const cplx h(rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0));
            for (std::size_t i = 0; i < length; ++i) faded[i] = amp * h * sym[i];
            break;
        }
        case ChannelModel::IidTaps:
            for (std::size_t i = 0; i < length; ++i) {
                const cplx h(rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0));
                faded[i] = amp * h * sym[i];
            }
            break;
    }

    std::vector<cplx> noise(length, cplx(0.0, 0.0));
    if (!noiseless) {
        for (auto& v : noise) v = cplx(rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0));
    }

    double total = 0.0;
    for (std::size_t i = 0; i < length; ++i) total += std::norm(faded[i] + noise[i]);
    const double scale = total > 0.0 ? 1.0 / std::sqrt(total) : 1.0;

    SynthParts parts;
    parts.sample.iq.resize(2 * length);
    parts.signal_part.resize(2 * length);
    parts.noise_part.resize(2 * length);
    parts.sample.snr_db = snr_db;
    for (std::size_t i = 0; i < length; ++i) {
        const cplx s = scale * faded[i];
        const cplx n = scale * noise[i];
        parts.signal_part[2 * i] = s.real();
        parts.signal_part[2 * i + 1] = s.imag();
        parts.noise_part[2 * i] = n.real();
        parts.noise_part[2 * i + 1] = n.imag();
        parts.sample.iq[2 * i] = s.real() + n.real();
        parts.sample.iq[2 * i + 1] = s.imag() + n.imag();
    }
    return parts;
}

SignalSample synth_signal(Scheme scheme, double snr_db, std::size_t length, RngStream& rng,
                          ChannelModel channel) {
    return synth_signal_parts(scheme, snr_db, length, rng, channel).sample;
}

LabeledDataset build_dataset(const DatasetSpec& spec, RngStream& rng) {
    if (spec.schemes.empty()) throw ConfigError("dataset needs at least one scheme");
    if (spec.per_class < 1) throw ConfigError("per_class must be at least 1");
    if (spec.snrs_db.empty()) throw ConfigError("dataset needs at least one SNR level");

    LabeledDataset out;
    out.class_count = static_cast<int>(spec.schemes.size());
    out.samples.reserve(spec.schemes.size() * spec.snrs_db.size() *
                        static_cast<std::size_t>(spec.per_class));
    for (std::size_t c = 0; c < spec.schemes.size(); ++c) {
        for (const double snr : spec.snrs_db) {
            for (int i = 0; i < spec.per_class; ++i) {
                SignalSample s = synth_signal(spec.schemes[c], snr, spec.length, rng, spec.channel);
                s.label = static_cast<int>(c);
                out.samples.push_back(std::move(s));
            }
        }
    }
    return out;
}

double pnr_db(double psr_db, double snr_db) { return psr_db + snr_db; }

double signal_power_share(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0.0) return 1.0;
    const double rho = std::pow(10.0, snr_db / 10.0);
    return rho / (1.0 + rho);
}

double perturbation_power_for_pnr(double pnr_db_value, double snr_db, const SignalSample& sample) {
    const double psr = std::pow(10.0, (pnr_db_value - snr_db) / 10.0);
    return psr * signal_power_share(snr_db) * sample.energy();
}

namespace {

void append_double(std::string& buf, double v) {
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.17g", v);
    buf += tmp;
}

}  // namespace

void write_dataset_csv(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::size_t len = dataset.samples.empty() ? 0 : dataset.samples.front().length();
    out << "label,snr_db";
    for (std::size_t i = 0; i < len; ++i) out << ",i" << i << ",q" << i;
    out << "\n";
    std::string line;
    for (const auto& s : dataset.samples) {
        line.clear();
        line += std::to_string(s.label);
        line += ',';
        append_double(line, s.snr_db);
        for (const double v : s.iq) {
            line += ',';
            append_double(line, v);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

LabeledDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);

    LabeledDataset out;
    int max_label = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        SignalSample s;
        if (!std::getline(ss, field, ',')) throw IoError("malformed row in " + path);
        s.label = std::stoi(field);
        if (!std::getline(ss, field, ',')) throw IoError("malformed row in " + path);
        s.snr_db = std::stod(field);
        while (std::getline(ss, field, ',')) s.iq.push_back(std::stod(field));
        if (s.iq.size() % 2 != 0) throw IoError("odd IQ column count in " + path);
        max_label = std::max(max_label, s.label);
        out.samples.push_back(std::move(s));
    }
    out.class_count = max_label + 1;
    return out;
}

void write_dataset_bin(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const char magic[8] = {'F', 'S', 'C', 'D', 'S', '0', '1', '\0'};
    out.write(magic, sizeof(magic));
    const std::uint64_t count = dataset.samples.size();
    const std::uint64_t len = dataset.samples.empty() ? 0 : dataset.samples.front().length();
    const std::uint64_t classes = static_cast<std::uint64_t>(dataset.class_count);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(reinterpret_cast<const char*>(&classes), 8);
    for (const auto& s : dataset.samples) {
        const std::int64_t label = s.label;
        out.write(reinterpret_cast<const char*>(&label), 8);
        out.write(reinterpret_cast<const char*>(&s.snr_db), 8);
        out.write(reinterpret_cast<const char*>(s.iq.data()),
                  static_cast<std::streamsize>(s.iq.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed: " + path);
}

LabeledDataset read_dataset_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, "FSCDS01", 7) != 0) throw IoError("bad dataset magic: " + path);
    std::uint64_t count = 0, len = 0, classes = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    in.read(reinterpret_cast<char*>(&len), 8);
    in.read(reinterpret_cast<char*>(&classes), 8);
    LabeledDataset out;
    out.class_count = static_cast<int>(classes);
    out.samples.resize(count);
    for (auto& s : out.samples) {
        std::int64_t label = 0;
        in.read(reinterpret_cast<char*>(&label), 8);
        in.read(reinterpret_cast<char*>(&s.snr_db), 8);
        s.label = static_cast<int>(label);
        s.iq.resize(2 * len);
        in.read(reinterpret_cast<char*>(s.iq.data()),
                static_cast<std::streamsize>(s.iq.size() * sizeof(double)));
        if (!in) throw IoError("truncated dataset file: " + path);
    }
    return out;
}

}  // namespace fedsc::sigsyn
