#pragma once

#include <limits>
#include <string>
#include <vector>

#include "fedsc/rng.hpp"

namespace fedsc::sigsyn {

// Desk-scale subset of common modulation constellations. The class label of a
// sample is its scheme's index in the dataset's scheme list.
enum class Scheme { Bpsk, Qpsk, Psk8, Pam4, Qam16, Cpfsk, Gfsk, AmDsb };

Scheme scheme_from_name(const std::string& name);  // throws SchemeError
std::string scheme_name(Scheme scheme);
const std::vector<Scheme>& default_schemes();

// How the diagonal channel taps are drawn for each emitted sample.
//   IidTaps  - one complex tap per time index, i.i.d. CN(0,1), fresh per sample
//   Block    - a single complex tap applied to the whole window
//   Identity - no channel (fixture mode)
enum class ChannelModel { IidTaps, Block, Identity };

ChannelModel channel_from_name(const std::string& name);  // throws ConfigError
std::string channel_name(ChannelModel model);

// SNR sentinel that disables the additive noise entirely.
inline constexpr double kNoiselessSnrDb = std::numeric_limits<double>::infinity();

// One received window of l complex samples stored as a real l x 2 matrix,
// row-major: iq[2*n] is the in-phase part, iq[2*n+1] the quadrature part.
// Every emitted sample is normalized to unit total energy.
struct SignalSample {
    std::vector<double> iq;
    int label = 0;
    double snr_db = 0.0;

    std::size_t length() const { return iq.size() / 2; }
    double energy() const;
};

struct LabeledDataset {
    std::vector<SignalSample> samples;
    int class_count = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Post-normalization decomposition of a sample into its faded-signal and
// noise parts; test oracles use it to estimate realized SNR.
struct SynthParts {
    SignalSample sample;
    std::vector<double> signal_part;
    std::vector<double> noise_part;
};

SignalSample synth_signal(Scheme scheme, double snr_db, std::size_t length, RngStream& rng,
                          ChannelModel channel = ChannelModel::IidTaps);
SynthParts synth_signal_parts(Scheme scheme, double snr_db, std::size_t length, RngStream& rng,
                              ChannelModel channel = ChannelModel::IidTaps);

struct DatasetSpec {
    std::vector<Scheme> schemes = default_schemes();
    int per_class = 100;  // per scheme per SNR level
    std::vector<double> snrs_db{8.0, 10.0};
    std::size_t length = 32;
    ChannelModel channel = ChannelModel::IidTaps;
};

// Balanced dataset of per_class * |schemes| * |snrs| samples, deterministic
// for a given stream.
LabeledDataset build_dataset(const DatasetSpec& spec, RngStream& rng);

// Perturbation power arithmetic. PNR[dB] = PSR[dB] + SNR[dB].
double pnr_db(double psr_db, double snr_db);

// Fraction of a unit-energy sample's power carried by the faded signal when
// the additive noise was drawn at snr_db: rho / (1 + rho). 1.0 for the
// noiseless sentinel.
double signal_power_share(double snr_db);

// Perturbation power P such that the perturbation-to-noise ratio equals
// pnr_db for a unit-energy sample received at snr_db.
double perturbation_power_for_pnr(double pnr_db, double snr_db, const SignalSample& sample);

// Dataset files. CSV: header row, then one row per sample holding
// label, snr_db and the 2l matrix entries in row-major order. The binary
// format stores the same fields as little-endian 64-bit floats.
void write_dataset_csv(const LabeledDataset& dataset, const std::string& path);
LabeledDataset read_dataset_csv(const std::string& path);
void write_dataset_bin(const LabeledDataset& dataset, const std::string& path);
LabeledDataset read_dataset_bin(const std::string& path);

}  // namespace fedsc::sigsyn
