#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace rramchar {

// Controller clock. One tick is the minimum programmable pulse quantum.
inline constexpr double kTickSeconds = 5e-9;

// Fixed chip topology.
inline constexpr int kNumSubArrays = 4;
inline constexpr int kNumRows = 512;
inline constexpr int kNumCols = 512;
inline constexpr int kColsPerSet = 16;
inline constexpr int kNumSets = kNumCols / kColsPerSet;  // 32

/// 8-bit column DAC, codes map linearly onto [v_min, v_max].
struct DacConfig {
    int bits = 8;
    double v_min_volts = 0.05;
    double v_max_volts = 3.0;

    int max_code() const { return (1 << bits) - 1; }
    double lsb_volts() const { return (v_max_volts - v_min_volts) / max_code(); }
};

/// 12-bit SAR ADC quantizer over [v_lo, v_hi].
struct AdcConfig {
    int bits = 12;
    double v_lo_volts = 0.1;
    double v_hi_volts = 1.7;
    double sample_rate_hz = 250e3;

    int max_code() const { return (1 << bits) - 1; }
    double lsb_volts() const { return (v_hi_volts - v_lo_volts) / max_code(); }
};

/// Five-stage logarithmic resistor bank with SC amplifier and comparator.
/// Stage 0 is the lowest resistance; consecutive stages step by a decade in
/// the default bank.
struct ResistorBank {
    static constexpr int kStages = 5;
    std::array<double, kStages> r_ohms{25.0, 250.0, 2500.0, 25000.0, 250000.0};
    double amp_gain = 32.0;
    // Comparator threshold at the amplifier output. 0.158 V keeps the
    // 20 nA bottom of the measurement range strictly above threshold at
    // stage 4 (32 * 20n * 250k = 0.1600 V would tie a 0.16 V threshold and
    // the comparator is strict).
    double v_threshold_volts = 0.158;
};

/// Behavioral 1T1R series elements around the device under test.
struct CellElectrical {
    double r_access_on_ohms = 50.0;   // access transistor + column switch
    double r_off_ohms = 1e10;         // deselected leakage path
};

/// Per-phase tick costs for the controller FSM. Sample/amplify phases get
/// longer toward the high-resistance stages.
struct TimingConfig {
    int setup_ticks = 4;                                  // row/col/DAC settle
    std::array<int, 5> sample_ticks{2, 2, 4, 8, 16};      // SC sampling phase
    std::array<int, 5> amplify_ticks{2, 2, 4, 8, 16};     // SC amplify phase
    int serializer_cycle_ticks = 1;

    int adc_conversion_ticks(const AdcConfig& adc) const;
};

/// Optional additive input-referred current noise, off by default.
struct NoiseConfig {
    bool enabled = false;
    double sigma_amps = 0.0;
    std::uint64_t seed = 0;
};

/// Every tunable constant of the simulated chip in one place. Loadable from
/// a JSON config file; keys documented in docs/file_formats.md.
struct ChipConfig {
    DacConfig dac;
    AdcConfig adc;
    ResistorBank bank;
    CellElectrical cell;
    TimingConfig timing;
    NoiseConfig noise;
    double stuck_short_ohms = 100.0;
    double stuck_open_ohms = 1e12;
    double default_min_switch_width_s = 10e-9;

    void validate() const;  // throws UsageError on bad invariants

    static ChipConfig from_json_file(const std::string& path);
    static ChipConfig from_json_text(const std::string& text);
    std::string to_json_text() const;

    // 16-bit digest of the configuration, used by transcript headers.
    std::uint16_t digest16() const;
};

}  // namespace rramchar
