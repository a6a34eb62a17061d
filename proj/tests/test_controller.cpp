#include <doctest.h>

#include <vector>

#include "rramchar/controller.hpp"
#include "rramchar/errors.hpp"
#include "rramchar/serializer.hpp"

using namespace rramchar;

namespace {

void set_memristor(ChipSimulator& chip, const CellAddress& a, double r_low, double r_high,
                   bool start_high = true) {
    auto& cell = chip.sub_array(a.sub_array).cell(a.row, a.col);
    cell.spec = DeviceModelSpec::memristor(r_low, r_high);
    cell.state = initial_state(cell.spec, start_high);
}

void set_linear(ChipSimulator& chip, const CellAddress& a, double r) {
    auto& cell = chip.sub_array(a.sub_array).cell(a.row, a.col);
    cell.spec = DeviceModelSpec::linear(r);
    cell.state = initial_state(cell.spec);
}

void program_single(ChipSimulator& chip, const CellAddress& a, std::uint16_t dac,
                    std::uint16_t pol, std::uint16_t width, std::uint16_t op) {
    const auto base = reg::bank_base(a.sub_array);
    chip.write_register(base + reg::kRowAddr, gray_encode(static_cast<std::uint16_t>(a.row)));
    chip.write_register(base + reg::kColAddr,
                        static_cast<std::uint16_t>((a.set_index() << 4) | a.col_in_set()));
    chip.write_register(base + reg::kDacCode, dac);
    chip.write_register(base + reg::kPolarity, pol);
    chip.write_register(base + reg::kPulseWidth, width);
    chip.write_register(base + reg::kOpMode, op);
}

}  // namespace

TEST_CASE("spi word codec") {
    SpiTransaction t{true, 0x42, 0xBEEF};
    CHECK(t.to_word() == 0x142BEEFu);
    auto back = SpiTransaction::from_word(0x142BEEFu);
    CHECK(back.rw);
    CHECK(back.reg_addr == 0x42);
    CHECK(back.payload == 0xBEEF);
    CHECK_THROWS_AS(SpiTransaction::from_word(0x2000000u), ParseError);
}

TEST_CASE("global registers") {
    ChipSimulator chip;
    CHECK(chip.read_register(reg::kChipId) == reg::kChipIdValue);
    CHECK(chip.read_register(reg::kVersion) == reg::kVersionValue);
    chip.write_register(reg::kScratch, 0xA5A5);
    CHECK(chip.read_register(reg::kScratch) == 0xA5A5);
    CHECK_THROWS_AS(chip.write_register(reg::kChipId, 1), RangeError);
    CHECK_THROWS_AS(chip.write_register(reg::kVersion, 1), RangeError);
    CHECK_THROWS_AS(chip.write_register(reg::kPopDigest, 1), RangeError);
    CHECK_THROWS_AS(chip.read_register(0x0F), RangeError);
    CHECK_THROWS_AS(chip.read_register(0xF0), RangeError);
}

TEST_CASE("bank registers mask their fields and reset sanely") {
    ChipSimulator chip;
    const auto base = reg::bank_base(2);
    chip.write_register(base + reg::kRowAddr, 0xFFFF);
    CHECK(chip.read_register(base + reg::kRowAddr) == 0x01FF);
    chip.write_register(base + reg::kDacCode, 0x1FF);
    CHECK(chip.read_register(base + reg::kDacCode) == 0xFF);
    chip.write_register(base + reg::kOpMode, 0xFFFF);
    CHECK(chip.read_register(base + reg::kOpMode) == 3);
    CHECK(chip.read_register(base + reg::kPulseWidth) == 1);  // reset value
    CHECK(chip.read_register(base + reg::kThreshold) == reg::kThresholdReset);
    CHECK_THROWS_AS(chip.write_register(base + reg::kPulseWidth, 0), RangeError);
    CHECK_THROWS_AS(chip.write_register(base + reg::kStatus, 1), RangeError);
    CHECK_THROWS_AS(chip.write_register(base + reg::kFrameCount, 1), RangeError);
    // GO reads as zero
    CHECK(chip.read_register(base + reg::kGo) == 0);
    // threshold reset lands near 0.158 V on the ADC scale
    CHECK(chip.threshold_volts(2) == doctest::Approx(0.15782661782661783).epsilon(1e-12));
}

TEST_CASE("write operation pulses the addressed cell with setup latency") {
    ChipSimulator chip;
    const CellAddress a{0, 3, 17};
    set_memristor(chip, a, 1e4, 1e6);

    // 1.63 V drive -> ~1.5 V across a 10 kohm device after the 50 ohm access
    program_single(chip, a, 137, 0, 20, reg::kOpWrite);
    const auto t0 = chip.time_ticks(0);
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    CHECK(chip.busy(0));
    CHECK(chip.read_register(reg::bank_base(0) + reg::kStatus) == reg::kStatusBusy);

    chip.run_sub_ticks(0, 23);  // setup 4 + pulse 20 = 24 ticks
    CHECK(chip.busy(0));
    chip.run_sub_ticks(0, 1);
    CHECK(!chip.busy(0));
    CHECK(chip.read_register(reg::bank_base(0) + reg::kStatus) == reg::kStatusDone);
    CHECK(chip.time_ticks(0) - t0 == 24);
    CHECK(chip.sub_array(0).cell(3, 17).state.current_resistance_ohms ==
          doctest::Approx(1e4));
    CHECK(!chip.sub_array(0).enabled_row().has_value());  // deselected when done

    auto timing = chip.last_timing(0);
    REQUIRE(timing.phases.size() == 2);
    CHECK(timing.phases[0].first == "setup");
    CHECK(timing.phases[1].second == 20);
    CHECK(timing.total_ticks() == 24);
}

TEST_CASE("reverse polarity write resets the cell") {
    ChipSimulator chip;
    const CellAddress a{1, 100, 200};
    set_memristor(chip, a, 1e4, 1e6, /*start_high=*/false);
    program_single(chip, a, 255, 1, 40, reg::kOpWrite);  // 3.0 V reverse
    chip.write_register(reg::bank_base(1) + reg::kGo, 1);
    chip.run_sub_until_idle(1);
    CHECK(chip.sub_array(1).cell(100, 200).state.current_resistance_ohms ==
          doctest::Approx(1e6));
}

TEST_CASE("sub-threshold or too-short pulses leave the cell alone") {
    ChipSimulator chip;
    const CellAddress a{0, 1, 1};
    set_memristor(chip, a, 1e4, 1e6);
    SUBCASE("low voltage") { program_single(chip, a, 100, 0, 20, reg::kOpWrite); }
    SUBCASE("one-tick pulse under the minimum width") {
        program_single(chip, a, 137, 0, 1, reg::kOpWrite);
    }
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_until_idle(0);
    CHECK(chip.sub_array(0).cell(1, 1).state.current_resistance_ohms ==
          doctest::Approx(1e6));
}

TEST_CASE("go is rejected while busy and the op still completes") {
    ChipSimulator chip;
    const CellAddress a{0, 0, 0};
    set_linear(chip, a, 1e3);
    program_single(chip, a, 39, 0, 100, reg::kOpWrite);
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_ticks(0, 5);
    try {
        chip.write_register(reg::bank_base(0) + reg::kGo, 1);
        FAIL("expected BusyError");
    } catch (const BusyError& e) {
        CHECK(e.code() == ErrorCode::busy);
        CHECK(e.exit_code() == 2);
    }
    chip.run_sub_until_idle(0);
    CHECK(!chip.busy(0));
    // GO with OP_MODE idle is a no-op
    chip.write_register(reg::bank_base(0) + reg::kOpMode, reg::kOpIdle);
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    CHECK(!chip.busy(0));
}

TEST_CASE("read operation emits one decodable packet with the right timing") {
    ChipSimulator chip;
    const CellAddress a{0, 3, 17};  // set 1, col_in_set 1
    set_linear(chip, a, 1e3);
    program_single(chip, a, 39, 0, 1, reg::kOpRead);
    const auto t0 = chip.time_ticks(0);
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_until_idle(0);

    const auto syms = chip.drain_symbols(0);
    REQUIRE(static_cast<int>(syms.size()) == 1 + 1 + 13);  // packet index = set 1
    const auto word = deserialize_single(syms, 1);
    const auto p = unpack_packet(word);
    CHECK(p.valid());
    CHECK(p.col_in_set == 1);
    CHECK((p.status & kStatusSeqMask) == 0);
    CHECK(!(p.status & kStatusSatLow));
    CHECK(!(p.status & kStatusSatHigh));

    // matches a direct conversion of the same source
    const double v_drive = dac_code_to_voltage(39, chip.config().dac);
    ResistorBank bank = chip.config().bank;
    bank.v_threshold_volts = chip.threshold_volts(0);
    const auto direct = autorange_convert(TheveninSource{v_drive, 1e3 + 50.0}, bank,
                                          chip.config().adc);
    CHECK(p.adc_code == direct.adc_code);
    CHECK(p.gain_sel == direct.gain_sel);
    CHECK(p.gain_sel == 0x01);  // 0.5 V / 1 kohm trips stage 0

    // setup 4 + autorange (stage 0: sample 2 + amplify 2) + adc 800 + serialize 15
    CHECK(chip.time_ticks(0) - t0 == 4 + 4 + 800 + 15);

    // second read bumps the sequence counter
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_until_idle(0);
    const auto p2 = unpack_packet(deserialize_single(chip.drain_symbols(0), 1));
    CHECK((p2.status & kStatusSeqMask) == 1);
}

TEST_CASE("programmable threshold changes stage selection") {
    ChipSimulator chip;
    const CellAddress a{0, 3, 17};
    set_linear(chip, a, 1e3);
    // raise the comparator threshold above stage 0's 0.37 V amplifier output
    chip.write_register(reg::bank_base(0) + reg::kThreshold, 1766);  // ~0.79 V
    program_single(chip, a, 39, 0, 1, reg::kOpRead);
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_until_idle(0);
    const auto p = unpack_packet(deserialize_single(chip.drain_symbols(0), 1));
    CHECK(p.gain_sel == 0x02);  // pushed to stage 1, which overdrives the ADC
    CHECK((p.status & kStatusSatHigh) != 0);
}

TEST_CASE("read-all streams a full frame with control packets") {
    ChipSimulator chip;
    for (int set = 0; set < kNumSets; ++set)
        set_linear(chip, {2, 9, set * kColsPerSet + 5}, 1e4 * (set + 1));
    const auto base = reg::bank_base(2);
    chip.write_register(base + reg::kRowAddr, gray_encode(9));
    for (int i = 0; i < 8; ++i)
        chip.write_register(static_cast<std::uint8_t>(base + reg::kColSel0 + i), 0x5555);
    for (int i = 0; i < 16; ++i)
        chip.write_register(static_cast<std::uint8_t>(base + reg::kDacSet0 + i), 0x2727);
    chip.write_register(base + reg::kOpMode, reg::kOpReadAll);
    chip.write_register(base + reg::kGo, 1);
    chip.run_sub_until_idle(2);

    const auto syms = chip.drain_symbols(2);
    REQUIRE(static_cast<int>(syms.size()) == 443);
    const auto decoded = deserialize_frame(syms);
    CHECK(decoded.frame_counter == 0);
    CHECK(decoded.reg_checksum == chip.register_checksum(2));
    CHECK_NOTHROW(verify_frame_checksum(decoded, chip.register_checksum(2)));
    CHECK(chip.read_register(base + reg::kFrameCount) == 1);

    for (int set = 0; set < kNumSets; ++set) {
        const auto p = unpack_packet(decoded.frame.entries[static_cast<std::size_t>(set)]);
        CHECK(p.valid());
        CHECK(p.col_in_set == 5);
        CHECK(p.gain_sel != 0);
    }

    // second frame increments the counter in the header
    chip.write_register(base + reg::kGo, 1);
    chip.run_sub_until_idle(2);
    const auto decoded2 = deserialize_frame(chip.drain_symbols(2));
    CHECK(decoded2.frame_counter == 1);
    CHECK(chip.read_register(base + reg::kFrameCount) == 2);
}

TEST_CASE("read disturb: a fragile cell flips during the read and reports its new state") {
    ChipSimulator chip;
    const CellAddress a{0, 3, 17};
    auto& cell = chip.sub_array(0).cell(3, 17);
    cell.spec = DeviceModelSpec::memristor(1e4, 1e6, /*v_set=*/0.3, /*v_reset=*/1.5);
    cell.state = initial_state(cell.spec, true);
    program_single(chip, a, 39, 0, 1, reg::kOpRead);  // ~0.5 V read
    chip.write_register(reg::bank_base(0) + reg::kGo, 1);
    chip.run_sub_until_idle(0);
    CHECK(cell.state.current_resistance_ohms == doctest::Approx(1e4));
    const auto p = unpack_packet(deserialize_single(chip.drain_symbols(0), 1));
    // the shipped code reflects the post-disturb low state
    ResistorBank bank = chip.config().bank;
    bank.v_threshold_volts = chip.threshold_volts(0);
    const auto direct = autorange_convert(
        TheveninSource{dac_code_to_voltage(39, chip.config().dac), 1e4 + 50.0}, bank,
        chip.config().adc);
    CHECK(p.adc_code == direct.adc_code);
}

TEST_CASE("sub-array lanes run independently and in lockstep") {
    ChipSimulator lockstep, serial;
    for (ChipSimulator* chip : {&lockstep, &serial}) {
        set_linear(*chip, {0, 3, 17}, 1e3);
        set_linear(*chip, {1, 4, 33}, 1e5);
        program_single(*chip, {0, 3, 17}, 39, 0, 1, reg::kOpRead);
        program_single(*chip, {1, 4, 33}, 39, 0, 1, reg::kOpRead);
    }
    lockstep.write_register(reg::bank_base(0) + reg::kGo, 1);
    lockstep.write_register(reg::bank_base(1) + reg::kGo, 1);
    while (lockstep.busy(0) || lockstep.busy(1)) lockstep.run_ticks(100);

    serial.write_register(reg::bank_base(0) + reg::kGo, 1);
    serial.run_sub_until_idle(0);
    serial.write_register(reg::bank_base(1) + reg::kGo, 1);
    serial.run_sub_until_idle(1);

    CHECK(lockstep.drain_symbols(0) == serial.drain_symbols(0));
    CHECK(lockstep.drain_symbols(1) == serial.drain_symbols(1));
}

TEST_CASE("optional noise perturbs conversions deterministically") {
    ChipConfig cfg;
    cfg.noise.enabled = true;
    cfg.noise.sigma_amps = 5e-6;
    cfg.noise.seed = 1234;
    ChipSimulator a(cfg), b(cfg);
    std::vector<std::uint16_t> codes_a, codes_b;
    for (ChipSimulator* chip : {&a, &b}) {
        set_linear(*chip, {0, 3, 17}, 1e3);
        program_single(*chip, {0, 3, 17}, 39, 0, 1, reg::kOpRead);
        auto& codes = chip == &a ? codes_a : codes_b;
        for (int i = 0; i < 4; ++i) {
            chip->write_register(reg::bank_base(0) + reg::kGo, 1);
            chip->run_sub_until_idle(0);
            codes.push_back(unpack_packet(deserialize_single(chip->drain_symbols(0), 1)).adc_code);
        }
    }
    CHECK(codes_a == codes_b);  // bit-exact across instances
    bool varied = false;
    for (std::size_t i = 1; i < codes_a.size(); ++i)
        if (codes_a[i] != codes_a[0]) varied = true;
    CHECK(varied);
    // clean config reads are steady
    ChipSimulator quiet;
    set_linear(quiet, {0, 3, 17}, 1e3);
    program_single(quiet, {0, 3, 17}, 39, 0, 1, reg::kOpRead);
    std::uint16_t first = 0;
    for (int i = 0; i < 3; ++i) {
        quiet.write_register(reg::bank_base(0) + reg::kGo, 1);
        quiet.run_sub_until_idle(0);
        const auto code =
            unpack_packet(deserialize_single(quiet.drain_symbols(0), 1)).adc_code;
        if (i == 0)
            first = code;
        else
            CHECK(code == first);
    }
}
