#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rramchar/config.hpp"
#include "rramchar/controller.hpp"
#include "rramchar/errors.hpp"
#include "rramchar/population.hpp"

using namespace rramchar;

TEST_CASE("default config validates and round trips through json") {
    ChipConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    const auto text = cfg.to_json_text();
    auto back = ChipConfig::from_json_text(text);
    CHECK(back.digest16() == cfg.digest16());
    CHECK(back.bank.v_threshold_volts == doctest::Approx(cfg.bank.v_threshold_volts));
    CHECK(back.timing.adc_conversion_ticks(back.adc) == 800);
}

TEST_CASE("config json overrides individual fields") {
    auto cfg = ChipConfig::from_json_text(R"({"bank": {"v_threshold_volts": 0.2},
                                            "cell": {"r_access_on_ohms": 75.0}})");
    CHECK(cfg.bank.v_threshold_volts == doctest::Approx(0.2));
    CHECK(cfg.cell.r_access_on_ohms == doctest::Approx(75.0));
    CHECK(cfg.dac.v_max_volts == doctest::Approx(3.0));  // untouched default
    CHECK(cfg.digest16() != ChipConfig().digest16());
}

TEST_CASE("config validation rejects broken invariants") {
    ChipConfig cfg;
    SUBCASE("non-increasing bank") {
        cfg.bank.r_ohms = {25.0, 25.0, 2500.0, 25000.0, 250000.0};
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SUBCASE("inverted adc range") {
        cfg.adc.v_hi_volts = cfg.adc.v_lo_volts;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SUBCASE("inverted dac range") {
        cfg.dac.v_min_volts = 3.5;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SUBCASE("zero sample rate") {
        cfg.adc.sample_rate_hz = 0.0;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SUBCASE("negative timing") {
        cfg.timing.setup_ticks = -1;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
}

TEST_CASE("config file errors map to the right exceptions") {
    CHECK_THROWS_AS(ChipConfig::from_json_file("/nonexistent/cfg.json"), IoError);
    CHECK_THROWS_AS(ChipConfig::from_json_text("{not json"), ParseError);
    try {
        ChipConfig::from_json_text("{not json");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
        CHECK(e.exit_code() == 1);
    }
}

TEST_CASE("rng helpers are deterministic and sane") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
    Rng c(42);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = c.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("population spec json round trip") {
    PopulationSpec spec;
    spec.seed = 77;
    spec.defaults.variant = DeviceVariant::BistableMemristor;
    spec.defaults.r_low_ohms = 5e3;
    spec.defaults.r_high_ohms = 2e6;
    spec.defaults.sigma_log = 0.1;
    spec.defaults.initial = InitialState::Low;
    spec.defects.stuck_open_frac = 0.001;
    spec.defects.stuck_short_frac = 0.002;
    CellEntry e;
    e.addr = {1, 2, 3};
    e.spec = DeviceModelSpec::linear(1234.0);
    spec.cells.push_back(e);
    auto back = PopulationSpec::from_json_text(spec.to_json_text());
    CHECK(back.seed == 77);
    CHECK(back.defaults.variant == DeviceVariant::BistableMemristor);
    CHECK(back.defaults.r_low_ohms == doctest::Approx(5e3));
    CHECK(back.defaults.sigma_log == doctest::Approx(0.1));
    CHECK(back.defaults.initial == InitialState::Low);
    CHECK(back.defects.stuck_short_frac == doctest::Approx(0.002));
    REQUIRE(back.cells.size() == 1);
    CHECK(back.cells[0].addr == CellAddress{1, 2, 3});
    CHECK(back.cells[0].spec.variant == DeviceVariant::LinearResistor);
    CHECK(back.cells[0].spec.resistance_ohms == doctest::Approx(1234.0));
}

TEST_CASE("population validation") {
    PopulationSpec spec;
    spec.defects.stuck_open_frac = 0.9;
    spec.defects.stuck_short_frac = 0.2;  // sums past 1
    CHECK_THROWS_AS(spec.validate(), UsageError);
    spec.defects = {};
    spec.defaults.r_min_ohms = 10.0;
    spec.defaults.r_max_ohms = 1.0;
    CHECK_THROWS_AS(spec.validate(), UsageError);
    CHECK_THROWS_AS(PopulationSpec::from_json_text("{\"default\": {\"variant\": \"x\"}}"),
                    ParseError);
    CHECK_THROWS_AS(PopulationSpec::from_json_file("/nonexistent/pop.json"), IoError);
}

TEST_CASE("populate_chip is deterministic and honors overrides") {
    ChipConfig cfg;
    PopulationSpec spec;
    spec.seed = 20260815;
    spec.defaults.variant = DeviceVariant::LinearResistor;
    spec.defaults.r_min_ohms = 1e3;
    spec.defaults.r_max_ohms = 1e7;
    spec.defects.stuck_open_frac = 0.001;
    spec.defects.stuck_short_frac = 0.001;
    CellEntry e;
    e.addr = {3, 511, 511};
    e.spec = DeviceModelSpec::memristor(1e4, 1e6);
    e.start_high = false;
    spec.cells.push_back(e);

    ChipSimulator chip_a(cfg), chip_b(cfg);
    const auto da = populate_chip(chip_a, spec);
    const auto db = populate_chip(chip_b, spec);
    CHECK(da == db);
    CHECK(da == population_digest(chip_a));
    CHECK(chip_a.population_digest() == da);
    // digest is visible over the register interface
    CHECK(chip_a.read_register(reg::kPopDigest) == da);

    // the override landed
    const auto& cell = chip_a.sub_array(3).cell(511, 511);
    CHECK(cell.spec.variant == DeviceVariant::BistableMemristor);
    CHECK(cell.state.current_resistance_ohms == doctest::Approx(1e4));

    // defaults are log-uniform within bounds
    int defects = 0;
    for (int col = 0; col < kNumCols; ++col) {
        const auto& c = chip_a.sub_array(0).cell(0, col);
        if (c.spec.variant == DeviceVariant::Defective) {
            ++defects;
            continue;
        }
        CHECK(c.spec.resistance_ohms >= 1e3);
        CHECK(c.spec.resistance_ohms <= 1e7);
    }

    // a different seed yields a different layout
    spec.seed = 1;
    ChipSimulator chip_c(cfg);
    CHECK(populate_chip(chip_c, spec) != da);
}

TEST_CASE("defect rates come out near their nominal fractions") {
    ChipConfig cfg;
    PopulationSpec spec;
    spec.seed = 5;
    spec.defects.stuck_open_frac = 0.01;
    spec.defects.stuck_short_frac = 0.01;
    ChipSimulator chip(cfg);
    populate_chip(chip, spec);
    int open = 0, shorted = 0;
    const auto& sa = chip.sub_array(0);
    for (int r = 0; r < kNumRows; ++r) {
        for (int c = 0; c < kNumCols; ++c) {
            const auto& cell = sa.cell(r, c);
            if (cell.spec.variant != DeviceVariant::Defective) continue;
            if (cell.spec.defect_kind == DefectKind::StuckOpen)
                ++open;
            else
                ++shorted;
        }
    }
    const double n = kNumRows * kNumCols;
    // ~5 sigma window around 1%
    CHECK(open > n * 0.01 - 5 * std::sqrt(n * 0.01));
    CHECK(open < n * 0.01 + 5 * std::sqrt(n * 0.01));
    CHECK(shorted > n * 0.01 - 5 * std::sqrt(n * 0.01));
    CHECK(shorted < n * 0.01 + 5 * std::sqrt(n * 0.01));
    // defective cells use the configured stuck resistances
    bool found = false;
    for (int c = 0; c < kNumCols && !found; ++c) {
        const auto& cell = sa.cell(0, c);
        if (cell.spec.variant == DeviceVariant::Defective &&
            cell.spec.defect_kind == DefectKind::StuckShort) {
            CHECK(cell.state.current_resistance_ohms == doctest::Approx(cfg.stuck_short_ohms));
            found = true;
        }
    }
}

TEST_CASE("memristor population spreads levels log-normally without crossing") {
    ChipConfig cfg;
    PopulationSpec spec;
    spec.seed = 9;
    spec.defaults.variant = DeviceVariant::BistableMemristor;
    spec.defaults.r_low_ohms = 1e4;
    spec.defaults.r_high_ohms = 1e6;
    spec.defaults.sigma_log = 0.2;
    ChipSimulator chip(cfg);
    populate_chip(chip, spec);
    bool saw_spread = false;
    for (int c = 0; c < kNumCols; ++c) {
        const auto& cell = chip.sub_array(1).cell(7, c);
        REQUIRE(cell.spec.variant == DeviceVariant::BistableMemristor);
        CHECK(cell.spec.r_low_ohms < cell.spec.r_high_ohms);
        if (std::abs(cell.spec.r_low_ohms - 1e4) > 1.0) saw_spread = true;
    }
    CHECK(saw_spread);
}
