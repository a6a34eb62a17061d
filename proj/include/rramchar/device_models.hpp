#pragma once

#include <cstdint>

#include "rramchar/config.hpp"

namespace rramchar {

enum class DeviceVariant : std::uint8_t {
    LinearResistor,
    BistableMemristor,
    Defective,
};

enum class DefectKind : std::uint8_t {
    StuckOpen,
    StuckShort,
};

/// Electrical model of one device under test.
struct DeviceModelSpec {
    DeviceVariant variant = DeviceVariant::LinearResistor;
    double resistance_ohms = 1e6;     // LinearResistor / Defective constant
    double r_low_ohms = 1e4;          // BistableMemristor LRS
    double r_high_ohms = 1e6;         // BistableMemristor HRS
    double v_set_volts = 1.5;         // switch-to-LRS threshold magnitude
    double v_reset_volts = 1.5;       // switch-to-HRS threshold magnitude
    double min_switch_width_s = 10e-9;
    DefectKind defect_kind = DefectKind::StuckOpen;

    static DeviceModelSpec linear(double r_ohms);
    static DeviceModelSpec memristor(double r_low, double r_high,
                                     double v_set = 1.5, double v_reset = 1.5,
                                     double min_width_s = 10e-9);
    static DeviceModelSpec defective(DefectKind kind, const ChipConfig& cfg);

    void validate() const;
};

struct DeviceState {
    double current_resistance_ohms = 1e6;
    std::uint32_t switch_count = 0;
};

/// Initial state for a spec: memristors start in the given state, others at
/// their fixed resistance.
DeviceState initial_state(const DeviceModelSpec& spec, bool start_high = true);

/// Ohmic current through the device for a given voltage across it.
/// |v| is limited to the 5 V drive ceiling.
double device_current(const DeviceState& state, const DeviceModelSpec& spec,
                      double v_across_volts);

/// Applies one voltage pulse. Bistable devices switch to r_low on
/// v >= +v_set and to r_high on v <= -v_reset when the pulse is at least
/// min_switch_width long; everything else leaves the state untouched.
DeviceState apply_write_pulse(const DeviceState& state, const DeviceModelSpec& spec,
                              double v_across_volts, double width_s);

/// Series resistance of the addressed 1T1R path: device + access switch when
/// selected, leakage path otherwise.
double cell_path_resistance(const DeviceState& state, const CellElectrical& cell,
                            bool selected);

}  // namespace rramchar
