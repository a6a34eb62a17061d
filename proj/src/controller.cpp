#include "rramchar/controller.hpp"

#include <algorithm>
#include <string>

#include "rramchar/errors.hpp"
#include "rramchar/hash.hpp"
#include "rramchar/population.hpp"

namespace rramchar {

std::uint32_t SpiTransaction::to_word() const {
    return (static_cast<std::uint32_t>(rw) << 24) |
           (static_cast<std::uint32_t>(reg_addr) << 16) | payload;
}

SpiTransaction SpiTransaction::from_word(std::uint32_t word) {
    if (word >> 25) throw ParseError("SPI word wider than 25 bits");
    SpiTransaction t;
    t.rw = (word >> 24) & 1;
    t.reg_addr = static_cast<std::uint8_t>((word >> 16) & 0xFF);
    t.payload = static_cast<std::uint16_t>(word & 0xFFFF);
    return t;
}

std::uint64_t TimingReport::total_ticks() const {
    std::uint64_t total = 0;
    for (const auto& [name, ticks] : phases) total += ticks;
    return total;
}

namespace {

struct BankField {
    std::uint16_t mask;
    bool writable;
};

BankField bank_field(std::uint8_t offset) {
    using namespace reg;
    if (offset == kRowAddr || offset == kColAddr) return {0x01FF, true};
    if (offset == kDacCode) return {0x00FF, true};
    if (offset == kPolarity) return {0x0001, true};
    if (offset == kPulseWidth) return {0xFFFF, true};
    if (offset == kThreshold) return {0x0FFF, true};
    if (offset == kOpMode) return {0x0003, true};
    if (offset == kGo) return {0x0001, true};
    if (offset == kStatus || offset == kFrameCount) return {0xFFFF, false};
    if (offset >= kColSel0 && offset < kColSel0 + 8) return {0xFFFF, true};
    if (offset >= kDacSet0 && offset < kDacSet0 + 16) return {0xFFFF, true};
    throw RangeError("unmapped register offset " + std::to_string(offset));
}

}  // namespace

ChipSimulator::ChipSimulator(ChipConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    adc_ticks_ = cfg_.timing.adc_conversion_ticks(cfg_.adc);
    for (auto& u : units_) {
        u.array.set_electrical(cfg_.cell);
        u.regs[reg::kPulseWidth] = 1;
        u.regs[reg::kThreshold] = reg::kThresholdReset;
    }
}

std::uint16_t ChipSimulator::bank_reg(int sub, std::uint8_t offset) const {
    return units_[sub].regs[offset];
}

int ChipSimulator::col_sel(int sub, int set) const {
    const std::uint16_t word = units_[sub].regs[reg::kColSel0 + set / 4];
    return (word >> (4 * (set % 4))) & 0xF;
}

std::uint8_t ChipSimulator::dac_set(int sub, int set) const {
    const std::uint16_t word = units_[sub].regs[reg::kDacSet0 + set / 2];
    return static_cast<std::uint8_t>((word >> (8 * (set % 2))) & 0xFF);
}

ResistorBank ChipSimulator::effective_bank(int sub) const {
    ResistorBank bank = cfg_.bank;
    bank.v_threshold_volts =
        adc_code_to_voltage(units_[sub].regs[reg::kThreshold], cfg_.adc);
    return bank;
}

double ChipSimulator::threshold_volts(int sub) const {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return adc_code_to_voltage(units_[sub].regs[reg::kThreshold], cfg_.adc);
}

std::uint16_t ChipSimulator::spi_access(const SpiTransaction& t) {
    const std::uint8_t addr = t.reg_addr;

    // Global registers.
    if (addr < 0x10) {
        switch (addr) {
            case reg::kChipId:
                if (t.rw) throw RangeError("CHIP_ID is read-only");
                return reg::kChipIdValue;
            case reg::kVersion:
                if (t.rw) throw RangeError("VERSION is read-only");
                return reg::kVersionValue;
            case reg::kScratch:
                if (t.rw) scratch_ = t.payload;
                return scratch_;
            case reg::kPopDigest:
                if (t.rw) throw RangeError("POP_DIGEST is read-only");
                return pop_digest_;
            default:
                throw RangeError("unmapped register address " +
                                 std::to_string(addr));
        }
    }

    const int sub = (addr - 0x10) / reg::kBankStride;
    const std::uint8_t offset =
        static_cast<std::uint8_t>((addr - 0x10) % reg::kBankStride);
    if (sub >= kNumSubArrays || offset >= reg::kBankRegCount)
        throw RangeError("unmapped register address " + std::to_string(addr));

    Unit& u = units_[sub];
    if (!t.rw) {
        if (offset == reg::kGo) return 0;
        if (offset == reg::kStatus)
            return static_cast<std::uint16_t>((u.busy ? reg::kStatusBusy : 0) |
                                              (u.done ? reg::kStatusDone : 0));
        if (offset == reg::kFrameCount) return u.frame_count;
        return u.regs[offset];
    }

    const BankField field = bank_field(offset);
    if (!field.writable) throw RangeError("register offset is read-only");
    const std::uint16_t value = t.payload & field.mask;

    if (offset == reg::kGo) {
        if (value & 1) {
            if (u.busy) throw BusyError("sub-array " + std::to_string(sub) +
                                        " is busy; GO rejected");
            start_operation(sub, u.regs[reg::kOpMode]);
        }
        return 0;
    }
    if (offset == reg::kPulseWidth && value == 0)
        throw RangeError("pulse width must be at least one tick");

    u.regs[offset] = value;
    return value;
}

std::uint16_t ChipSimulator::read_register(std::uint8_t addr) {
    return spi_access(SpiTransaction{false, addr, 0});
}

void ChipSimulator::write_register(std::uint8_t addr, std::uint16_t value) {
    spi_access(SpiTransaction{true, addr, value});
}

std::uint16_t ChipSimulator::register_checksum(int sub) const {
    std::uint16_t x = reg::kChipIdValue ^ reg::kVersionValue ^ scratch_ ^ pop_digest_;
    const Unit& u = units_[sub];
    for (std::uint8_t off = 0; off < reg::kBankRegCount; ++off) {
        if (off == reg::kGo || off == reg::kStatus || off == reg::kFrameCount)
            continue;
        x ^= u.regs[off];
    }
    return x;
}

void ChipSimulator::set_population_digest(std::uint16_t digest) {
    pop_digest_ = digest;
}

double ChipSimulator::noise_draw(int sub) {
    Unit& u = units_[sub];
    // Counter-seeded so each conversion's disturbance is independent of
    // workload interleaving across sub-arrays.
    Fnv64 h;
    h.update_u64(cfg_.noise.seed);
    h.update_u8(static_cast<std::uint8_t>(sub));
    h.update_u64(u.noise_stream++);
    Rng rng(h.h);
    return cfg_.noise.sigma_amps * rng.normal();
}

ReadoutResult ChipSimulator::convert_cell(int sub, const CellAddress& addr,
                                          double v_drive, Polarity pol,
                                          double dwell_s, int* stages_used) {
    Unit& u = units_[sub];
    const ResistorBank bank = effective_bank(sub);
    const double i_noise = cfg_.noise.enabled ? noise_draw(sub) : 0.0;

    auto convert_once = [&]() {
        const TheveninSource src = u.array.drive_cell(addr, v_drive, pol);
        return autorange_convert(src, bank, cfg_.adc, i_noise);
    };

    ReadoutResult rr = convert_once();

    // The read bias sits on the cell for the whole conversion, so it can
    // disturb a bistable device; the shipped measurement reflects the state
    // after that disturbance.
    auto& cell = u.array.cell(addr.row, addr.col);
    const double r_bank = cfg_.bank.r_ohms[rr.stage()];
    const double v_dut_mag =
        u.array.dut_voltage(addr, v_drive, Polarity::Forward, r_bank);
    const double v_dut = pol == Polarity::Forward ? v_dut_mag : -v_dut_mag;
    const DeviceState next = apply_write_pulse(cell.state, cell.spec, v_dut, dwell_s);
    if (next.current_resistance_ohms != cell.state.current_resistance_ohms) {
        cell.state = next;
        rr = convert_once();
    } else {
        cell.state = next;  // keeps switch_count bookkeeping uniform
    }

    if (stages_used) *stages_used = rr.stage() + 1;
    return rr;
}

void ChipSimulator::start_operation(int sub, std::uint16_t op) {
    Unit& u = units_[sub];
    if (op == reg::kOpIdle) return;  // GO with no operation selected

    u.busy = true;
    u.done = false;
    u.active_op = op;
    u.schedule.clear();
    u.phase_index = 0;
    u.phase_consumed = 0;
    u.pending_symbols.clear();
    u.last_timing.phases.clear();

    switch (op) {
        case reg::kOpWrite: start_write(sub); break;
        case reg::kOpRead: start_read(sub); break;
        case reg::kOpReadAll: start_read_all(sub); break;
        default: u.busy = false; throw RangeError("invalid operation mode");
    }

    for (const auto& ph : u.schedule)
        u.last_timing.phases.emplace_back(ph.name, ph.ticks);

    // Zero-length schedules complete immediately.
    while (u.busy && u.phase_index < u.schedule.size() &&
           u.schedule[u.phase_index].ticks == 0) {
        apply_effect(sub, u.schedule[u.phase_index].effect);
        ++u.phase_index;
        if (u.phase_index == u.schedule.size()) finish_operation(u);
    }
}

namespace {

CellAddress decode_address(int sub, std::uint16_t row_gray, std::uint16_t col_addr) {
    const int row = gray_decode(row_gray & 0x1FF);
    const int set = (col_addr >> 4) & 0x1F;
    const int col_in_set = col_addr & 0xF;
    return CellAddress{sub, row, set * kColsPerSet + col_in_set};
}

}  // namespace

void ChipSimulator::start_write(int sub) {
    Unit& u = units_[sub];
    const CellAddress addr =
        decode_address(sub, u.regs[reg::kRowAddr], u.regs[reg::kColAddr]);
    addr.validate();
    u.array.select_row(u.regs[reg::kRowAddr], true);
    u.array.select_column(addr.set_index(), addr.col_in_set());

    u.pending_write = WriteContext{
        addr, dac_code_to_voltage(static_cast<std::uint8_t>(u.regs[reg::kDacCode]),
                                  cfg_.dac),
        u.regs[reg::kPolarity] ? Polarity::Reverse : Polarity::Forward,
        u.regs[reg::kPulseWidth]};

    u.schedule.push_back({"setup", static_cast<std::uint64_t>(cfg_.timing.setup_ticks),
                          Effect::none});
    u.schedule.push_back(
        {"pulse", static_cast<std::uint64_t>(u.pending_write.width_ticks),
         Effect::write_pulse});
}

void ChipSimulator::start_read(int sub) {
    Unit& u = units_[sub];
    const CellAddress addr =
        decode_address(sub, u.regs[reg::kRowAddr], u.regs[reg::kColAddr]);
    addr.validate();
    const int set = addr.set_index();
    u.array.select_row(u.regs[reg::kRowAddr], true);
    u.array.select_column(set, addr.col_in_set());

    const double v_drive = dac_code_to_voltage(
        static_cast<std::uint8_t>(u.regs[reg::kDacCode]), cfg_.dac);
    const Polarity pol =
        u.regs[reg::kPolarity] ? Polarity::Reverse : Polarity::Forward;

    // Worst-case dwell for the disturbance model: full stage walk + one ADC
    // conversion.
    double dwell_ticks = adc_ticks_;
    for (int k = 0; k < ResistorBank::kStages; ++k)
        dwell_ticks += cfg_.timing.sample_ticks[k] + cfg_.timing.amplify_ticks[k];

    int stages_used = 0;
    const ReadoutResult rr =
        convert_cell(sub, addr, v_drive, pol, dwell_ticks * kTickSeconds, &stages_used);

    std::uint8_t status = kStatusValid | (u.seq & kStatusSeqMask);
    if (rr.saturated_low) status |= kStatusSatLow;
    if (rr.saturated_high) status |= kStatusSatHigh;
    ++u.seq;

    u.frame.entries[set] = pack_packet(DataPacket{
        rr.adc_code, rr.gain_sel, static_cast<std::uint8_t>(addr.col_in_set()),
        status});
    u.pending_symbols = retrieve_packet(u.frame, set).symbols;

    std::uint64_t stage_ticks = 0;
    for (int k = 0; k < stages_used; ++k)
        stage_ticks += cfg_.timing.sample_ticks[k] + cfg_.timing.amplify_ticks[k];

    u.schedule.push_back({"setup", static_cast<std::uint64_t>(cfg_.timing.setup_ticks),
                          Effect::none});
    u.schedule.push_back({"autorange", stage_ticks, Effect::none});
    u.schedule.push_back({"adc", static_cast<std::uint64_t>(adc_ticks_), Effect::none});
    u.schedule.push_back(
        {"serialize",
         u.pending_symbols.size() *
             static_cast<std::uint64_t>(cfg_.timing.serializer_cycle_ticks),
         Effect::emit});
}

void ChipSimulator::start_read_all(int sub) {
    Unit& u = units_[sub];
    const int row = gray_decode(u.regs[reg::kRowAddr] & 0x1FF);
    u.array.select_row(u.regs[reg::kRowAddr], true);
    const Polarity pol =
        u.regs[reg::kPolarity] ? Polarity::Reverse : Polarity::Forward;

    double dwell_ticks = adc_ticks_;
    for (int k = 0; k < ResistorBank::kStages; ++k)
        dwell_ticks += cfg_.timing.sample_ticks[k] + cfg_.timing.amplify_ticks[k];

    std::uint64_t max_stage_ticks = 0;
    for (int set = 0; set < kNumSets; ++set) {
        const int col_in_set = col_sel(sub, set);
        u.array.select_column(set, col_in_set);
        const CellAddress addr{sub, row, set * kColsPerSet + col_in_set};
        const double v_drive = dac_code_to_voltage(dac_set(sub, set), cfg_.dac);

        int stages_used = 0;
        const ReadoutResult rr = convert_cell(sub, addr, v_drive, pol,
                                              dwell_ticks * kTickSeconds, &stages_used);

        std::uint8_t status = kStatusValid | (u.seq & kStatusSeqMask);
        if (rr.saturated_low) status |= kStatusSatLow;
        if (rr.saturated_high) status |= kStatusSatHigh;
        ++u.seq;

        u.frame.entries[set] = pack_packet(DataPacket{
            rr.adc_code, rr.gain_sel, static_cast<std::uint8_t>(col_in_set), status});

        std::uint64_t stage_ticks = 0;
        for (int k = 0; k < stages_used; ++k)
            stage_ticks += cfg_.timing.sample_ticks[k] + cfg_.timing.amplify_ticks[k];
        max_stage_ticks = std::max(max_stage_ticks, stage_ticks);
    }

    u.frame.entries[32] =
        make_control_header(u.frame_count, reg::kOpReadAll, /*busy=*/true,
                            /*done=*/false);
    u.frame.entries[33] = make_control_checksum(register_checksum(sub));
    u.pending_symbols = stream_frame(u.frame).symbols;

    // The 32 converters run in parallel; the frame waits for the slowest.
    u.schedule.push_back({"setup", static_cast<std::uint64_t>(cfg_.timing.setup_ticks),
                          Effect::none});
    u.schedule.push_back(
        {"convert", max_stage_ticks + static_cast<std::uint64_t>(adc_ticks_),
         Effect::none});
    u.schedule.push_back(
        {"stream",
         u.pending_symbols.size() *
             static_cast<std::uint64_t>(cfg_.timing.serializer_cycle_ticks),
         Effect::emit});
}

void ChipSimulator::apply_effect(int sub, Effect e) {
    Unit& u = units_[sub];
    switch (e) {
        case Effect::none: break;
        case Effect::write_pulse: {
            const WriteContext& wc = u.pending_write;
            auto& cell = u.array.cell(wc.addr.row, wc.addr.col);
            // Write path has no bank resistor in the loop.
            const double v_mag = u.array.dut_voltage(wc.addr, wc.v_drive,
                                                     Polarity::Forward, 0.0);
            const double v_dut = wc.pol == Polarity::Forward ? v_mag : -v_mag;
            cell.state = apply_write_pulse(cell.state, cell.spec, v_dut,
                                           wc.width_ticks * kTickSeconds);
            break;
        }
        case Effect::emit: {
            u.out_symbols.insert(u.out_symbols.end(), u.pending_symbols.begin(),
                                 u.pending_symbols.end());
            if (u.active_op == reg::kOpReadAll) ++u.frame_count;
            break;
        }
    }
}

void ChipSimulator::finish_operation(Unit& u) {
    u.busy = false;
    u.done = true;
    u.array.select_row(0, false);
}

void ChipSimulator::step_unit(int sub, std::uint64_t n) {
    Unit& u = units_[sub];
    while (n > 0 && u.busy) {
        Phase& ph = u.schedule[u.phase_index];
        const std::uint64_t remain = ph.ticks - u.phase_consumed;
        const std::uint64_t take = std::min(n, remain);
        u.phase_consumed += take;
        u.time_ticks += take;
        n -= take;
        if (u.phase_consumed == ph.ticks) {
            apply_effect(sub, ph.effect);
            ++u.phase_index;
            u.phase_consumed = 0;
            if (u.phase_index == u.schedule.size()) finish_operation(u);
        }
    }
    u.time_ticks += n;  // idle ticks still advance this unit's clock
}

void ChipSimulator::run_ticks(std::uint64_t n) {
    for (int sub = 0; sub < kNumSubArrays; ++sub) step_unit(sub, n);
}

void ChipSimulator::run_sub_ticks(int sub, std::uint64_t n) {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    step_unit(sub, n);
}

void ChipSimulator::run_sub_until_idle(int sub) {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    Unit& u = units_[sub];
    while (u.busy) {
        std::uint64_t remain = 0;
        for (std::size_t i = u.phase_index; i < u.schedule.size(); ++i)
            remain += u.schedule[i].ticks;
        remain -= u.phase_consumed;
        step_unit(sub, remain);
    }
}

bool ChipSimulator::busy(int sub) const {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return units_[sub].busy;
}

std::uint64_t ChipSimulator::time_ticks(int sub) const {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return units_[sub].time_ticks;
}

SubArray& ChipSimulator::sub_array(int sub) {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return units_[sub].array;
}

const SubArray& ChipSimulator::sub_array(int sub) const {
    return const_cast<ChipSimulator*>(this)->sub_array(sub);
}

std::vector<std::uint8_t> ChipSimulator::drain_symbols(int sub) {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    std::vector<std::uint8_t> out;
    out.swap(units_[sub].out_symbols);
    return out;
}

const TimingReport& ChipSimulator::last_timing(int sub) const {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return units_[sub].last_timing;
}

}  // namespace rramchar
