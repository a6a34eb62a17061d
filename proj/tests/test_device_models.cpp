#include <doctest.h>

#include "rramchar/device_models.hpp"
#include "rramchar/errors.hpp"

using namespace rramchar;

TEST_CASE("linear resistor obeys ohm's law at both polarities") {
    auto spec = DeviceModelSpec::linear(1.0e4);
    auto st = initial_state(spec);
    CHECK(st.current_resistance_ohms == doctest::Approx(1.0e4));
    CHECK(device_current(st, spec, 0.5) == doctest::Approx(5.0e-5));
    CHECK(device_current(st, spec, -0.5) == doctest::Approx(-5.0e-5));
    CHECK(device_current(st, spec, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("memristor initial state follows start_high") {
    auto spec = DeviceModelSpec::memristor(1.0e4, 1.0e6);
    CHECK(initial_state(spec, true).current_resistance_ohms == doctest::Approx(1.0e6));
    CHECK(initial_state(spec, false).current_resistance_ohms == doctest::Approx(1.0e4));
}

TEST_CASE("memristor switches only past threshold with sufficient width") {
    auto spec = DeviceModelSpec::memristor(1.0e4, 1.0e6, 1.5, 1.5, 10e-9);
    auto st = initial_state(spec, true);

    SUBCASE("set pulse at threshold switches to low state") {
        st = apply_write_pulse(st, spec, 1.5, 10e-9);
        CHECK(st.current_resistance_ohms == doctest::Approx(1.0e4));
        CHECK(st.switch_count == 1);
    }
    SUBCASE("sub-threshold voltage leaves state alone") {
        st = apply_write_pulse(st, spec, 1.4999, 1.0e-6);
        CHECK(st.current_resistance_ohms == doctest::Approx(1.0e6));
        CHECK(st.switch_count == 0);
    }
    SUBCASE("short pulse leaves state alone") {
        st = apply_write_pulse(st, spec, 3.0, 5e-9);
        CHECK(st.current_resistance_ohms == doctest::Approx(1.0e6));
        CHECK(st.switch_count == 0);
    }
    SUBCASE("reset needs negative voltage") {
        st = apply_write_pulse(st, spec, 1.5, 10e-9);
        st = apply_write_pulse(st, spec, -1.5, 10e-9);
        CHECK(st.current_resistance_ohms == doctest::Approx(1.0e6));
        CHECK(st.switch_count == 2);
    }
    SUBCASE("redundant set does not bump switch count") {
        st = apply_write_pulse(st, spec, 2.0, 20e-9);
        st = apply_write_pulse(st, spec, 2.0, 20e-9);
        CHECK(st.switch_count == 1);
    }
    SUBCASE("negative pulse on already-high device is a no-op") {
        st = apply_write_pulse(st, spec, -2.0, 1e-6);
        CHECK(st.current_resistance_ohms == doctest::Approx(1.0e6));
        CHECK(st.switch_count == 0);
    }
}

TEST_CASE("asymmetric thresholds are honored independently") {
    auto spec = DeviceModelSpec::memristor(1.0e4, 1.0e6, 1.2, 2.0, 10e-9);
    auto st = initial_state(spec, true);
    st = apply_write_pulse(st, spec, 1.25, 1e-7);
    CHECK(st.current_resistance_ohms == doctest::Approx(1.0e4));
    st = apply_write_pulse(st, spec, -1.9, 1e-7);  // below reset threshold magnitude
    CHECK(st.current_resistance_ohms == doctest::Approx(1.0e4));
    st = apply_write_pulse(st, spec, -2.0, 1e-7);
    CHECK(st.current_resistance_ohms == doctest::Approx(1.0e6));
}

TEST_CASE("defective devices never switch") {
    ChipConfig cfg;
    auto open_spec = DeviceModelSpec::defective(DefectKind::StuckOpen, cfg);
    auto short_spec = DeviceModelSpec::defective(DefectKind::StuckShort, cfg);
    auto so = initial_state(open_spec);
    auto ss = initial_state(short_spec);
    CHECK(so.current_resistance_ohms == doctest::Approx(cfg.stuck_open_ohms));
    CHECK(ss.current_resistance_ohms == doctest::Approx(cfg.stuck_short_ohms));
    so = apply_write_pulse(so, open_spec, 5.0, 1.0e-3);
    ss = apply_write_pulse(ss, short_spec, -5.0, 1.0e-3);
    CHECK(so.current_resistance_ohms == doctest::Approx(cfg.stuck_open_ohms));
    CHECK(ss.current_resistance_ohms == doctest::Approx(cfg.stuck_short_ohms));
    CHECK(so.switch_count == 0);
    CHECK(ss.switch_count == 0);
}

TEST_CASE("cell path resistance includes access device and isolates deselected cells") {
    ChipConfig cfg;
    auto spec = DeviceModelSpec::linear(1.0e3);
    auto st = initial_state(spec);
    CHECK(cell_path_resistance(st, cfg.cell, true) == doctest::Approx(1.0e3 + 50.0));
    CHECK(cell_path_resistance(st, cfg.cell, false) == doctest::Approx(cfg.cell.r_off_ohms));
}

TEST_CASE("model spec validation rejects nonsense") {
    // factories validate eagerly
    CHECK_THROWS_AS(DeviceModelSpec::linear(-1.0), UsageError);
    CHECK_THROWS_AS(DeviceModelSpec::memristor(1.0e6, 1.0e4), UsageError);  // low >= high
    CHECK_THROWS_AS(DeviceModelSpec::memristor(1.0e4, 1.0e6, -1.0), UsageError);
    CHECK_NOTHROW(DeviceModelSpec::memristor(1.0e4, 1.0e6).validate());
}
