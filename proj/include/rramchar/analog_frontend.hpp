#pragma once

#include <cstdint>

#include "rramchar/config.hpp"

namespace rramchar {

/// Equivalent source seen at the converter input: open-circuit voltage plus
/// the full series resistance of the addressed cell path.
struct TheveninSource {
    double v_open_volts = 0.0;
    double r_source_ohms = 1.0;
};

/// Result of one conversion: ADC code plus the one-hot gain (bank stage)
/// selection, bit 0 = lowest resistance stage.
struct ReadoutResult {
    std::uint16_t adc_code = 0;
    std::uint8_t gain_sel = 0;
    bool saturated_low = false;
    bool saturated_high = false;

    int stage() const;  // index of the one-hot bit
};

double dac_code_to_voltage(std::uint8_t code, const DacConfig& cfg);

/// Nearest code for a voltage; ties round up, out-of-range clamps.
std::uint8_t voltage_to_dac_code(double v_volts, const DacConfig& cfg);

/// Quantize a voltage; clamped to the input range, ties round up.
std::uint16_t adc_sample(double v_volts, const AdcConfig& cfg);

double adc_code_to_voltage(std::uint16_t code, const AdcConfig& cfg);

/// Autoranging conversion. Walks the bank from the lowest-resistance stage,
/// comparing the amplified bank voltage against the comparator threshold,
/// and stops at the first stage whose output exceeds it (or at the last
/// stage). The stage current re-solves the series circuit at each step, so a
/// soft source sees slightly less current on high stages.
///
/// i_noise_amps is an optional input-referred disturbance added to every
/// stage current (used by the chip-level noise option).
ReadoutResult autorange_convert(const TheveninSource& src, const ResistorBank& bank,
                                const AdcConfig& adc, double i_noise_amps = 0.0);

/// Inverse of the conversion chain: estimated input current for a readout.
/// Saturation flags are the caller's quality annotation; code 0 decodes to
/// the documented floor value v_lo / (gain * r[stage]).
double reconstruct_current(const ReadoutResult& r, const ResistorBank& bank,
                           const AdcConfig& adc);

}  // namespace rramchar
