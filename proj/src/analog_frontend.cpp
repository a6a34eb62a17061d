#include "rramchar/analog_frontend.hpp"

#include <algorithm>
#include <cmath>

#include "rramchar/errors.hpp"

namespace rramchar {

int ReadoutResult::stage() const {
    for (int k = 0; k < ResistorBank::kStages; ++k)
        if (gain_sel & (1u << k)) return k;
    return -1;
}

double dac_code_to_voltage(std::uint8_t code, const DacConfig& cfg) {
    return cfg.v_min_volts + static_cast<double>(code) * cfg.lsb_volts();
}

std::uint8_t voltage_to_dac_code(double v_volts, const DacConfig& cfg) {
    if (!std::isfinite(v_volts)) throw UsageError("DAC target voltage not finite");
    const double raw = (v_volts - cfg.v_min_volts) / cfg.lsb_volts();
    const long code = std::lround(std::floor(raw + 0.5));  // ties away from zero is
                                                           // fine: raw >= -0.5 rounds up
    return static_cast<std::uint8_t>(std::clamp(code, 0L, (long)cfg.max_code()));
}

std::uint16_t adc_sample(double v_volts, const AdcConfig& cfg) {
    if (!std::isfinite(v_volts)) throw UsageError("ADC input not finite");
    if (v_volts <= cfg.v_lo_volts) return 0;
    if (v_volts >= cfg.v_hi_volts) return static_cast<std::uint16_t>(cfg.max_code());
    const double raw = (v_volts - cfg.v_lo_volts) / cfg.lsb_volts();
    // round half up
    const double code = std::floor(raw + 0.5);
    return static_cast<std::uint16_t>(
        std::clamp<long>(static_cast<long>(code), 0, cfg.max_code()));
}

double adc_code_to_voltage(std::uint16_t code, const AdcConfig& cfg) {
    return cfg.v_lo_volts + static_cast<double>(code) * cfg.lsb_volts();
}

ReadoutResult autorange_convert(const TheveninSource& src, const ResistorBank& bank,
                                const AdcConfig& adc, double i_noise_amps) {
    if (!(src.r_source_ohms > 0.0) || !std::isfinite(src.r_source_ohms))
        throw UsageError("source resistance must be positive and finite");
    if (!std::isfinite(src.v_open_volts) || src.v_open_volts < 0.0)
        throw UsageError("open-circuit voltage must be non-negative");

    ReadoutResult out;
    int k = ResistorBank::kStages - 1;
    double v_amp = 0.0;
    bool tripped = false;
    for (int stage = 0; stage < ResistorBank::kStages; ++stage) {
        const double i =
            src.v_open_volts / (src.r_source_ohms + bank.r_ohms[stage]) + i_noise_amps;
        const double v = bank.amp_gain * i * bank.r_ohms[stage];
        v_amp = v;
        if (v > bank.v_threshold_volts) {
            k = stage;
            tripped = true;
            break;
        }
    }
    out.gain_sel = static_cast<std::uint8_t>(1u << k);
    out.adc_code = adc_sample(v_amp, adc);
    // Underrange: even the top stage stayed at or below the comparator
    // threshold. Overrange: the amplifier output pinned at the ADC ceiling.
    out.saturated_low = !tripped;
    out.saturated_high = v_amp >= adc.v_hi_volts;
    return out;
}

double reconstruct_current(const ReadoutResult& r, const ResistorBank& bank,
                           const AdcConfig& adc) {
    const int k = r.stage();
    if (k < 0) throw UsageError("readout has no gain stage selected");
    const double v_amp = adc_code_to_voltage(r.adc_code, adc);
    return v_amp / (bank.amp_gain * bank.r_ohms[k]);
}

}  // namespace rramchar
