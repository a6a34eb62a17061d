#include "rramchar/device_models.hpp"

#include <algorithm>
#include <cmath>

#include "rramchar/errors.hpp"

namespace rramchar {

DeviceModelSpec DeviceModelSpec::linear(double r_ohms) {
    DeviceModelSpec s;
    s.variant = DeviceVariant::LinearResistor;
    s.resistance_ohms = r_ohms;
    s.validate();
    return s;
}

DeviceModelSpec DeviceModelSpec::memristor(double r_low, double r_high, double v_set,
                                           double v_reset, double min_width_s) {
    DeviceModelSpec s;
    s.variant = DeviceVariant::BistableMemristor;
    s.r_low_ohms = r_low;
    s.r_high_ohms = r_high;
    s.v_set_volts = v_set;
    s.v_reset_volts = v_reset;
    s.min_switch_width_s = min_width_s;
    s.resistance_ohms = r_high;
    s.validate();
    return s;
}

DeviceModelSpec DeviceModelSpec::defective(DefectKind kind, const ChipConfig& cfg) {
    DeviceModelSpec s;
    s.variant = DeviceVariant::Defective;
    s.defect_kind = kind;
    s.resistance_ohms =
        kind == DefectKind::StuckShort ? cfg.stuck_short_ohms : cfg.stuck_open_ohms;
    s.validate();
    return s;
}

void DeviceModelSpec::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(resistance_ohms))
        throw UsageError("device resistance must be positive and finite");
    if (variant == DeviceVariant::BistableMemristor) {
        if (!positive(r_low_ohms) || !positive(r_high_ohms))
            throw UsageError("memristor levels must be positive and finite");
        if (r_low_ohms >= r_high_ohms)
            throw UsageError("memristor r_low must be below r_high");
        if (!positive(v_set_volts) || !positive(v_reset_volts))
            throw UsageError("memristor thresholds must be positive");
        if (!positive(min_switch_width_s))
            throw UsageError("memristor min switch width must be positive");
    }
}

DeviceState initial_state(const DeviceModelSpec& spec, bool start_high) {
    DeviceState st;
    if (spec.variant == DeviceVariant::BistableMemristor)
        st.current_resistance_ohms = start_high ? spec.r_high_ohms : spec.r_low_ohms;
    else
        st.current_resistance_ohms = spec.resistance_ohms;
    return st;
}

double device_current(const DeviceState& state, const DeviceModelSpec& spec,
                      double v_across_volts) {
    (void)spec;
    const double v = std::clamp(v_across_volts, -5.0, 5.0);
    return v / state.current_resistance_ohms;
}

DeviceState apply_write_pulse(const DeviceState& state, const DeviceModelSpec& spec,
                              double v_across_volts, double width_s) {
    DeviceState next = state;
    if (spec.variant != DeviceVariant::BistableMemristor) return next;
    if (width_s + 1e-15 < spec.min_switch_width_s) return next;

    if (v_across_volts >= spec.v_set_volts &&
        next.current_resistance_ohms != spec.r_low_ohms) {
        next.current_resistance_ohms = spec.r_low_ohms;
        ++next.switch_count;
    } else if (v_across_volts <= -spec.v_reset_volts &&
               next.current_resistance_ohms != spec.r_high_ohms) {
        next.current_resistance_ohms = spec.r_high_ohms;
        ++next.switch_count;
    }
    return next;
}

double cell_path_resistance(const DeviceState& state, const CellElectrical& cell,
                            bool selected) {
    if (!selected) return cell.r_off_ohms;
    return state.current_resistance_ohms + cell.r_access_on_ohms;
}

}  // namespace rramchar
