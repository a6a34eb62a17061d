#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rramchar/array_core.hpp"
#include "rramchar/config.hpp"
#include "rramchar/serializer.hpp"

namespace rramchar {

// ---------------------------------------------------------------------------
// Register map. 8-bit address space: four global registers, then one bank of
// identical registers per sub-array. Full table in docs/register_map.md.
// ---------------------------------------------------------------------------
namespace reg {

inline constexpr std::uint8_t kChipId = 0x00;     // RO, 0x1712
inline constexpr std::uint8_t kVersion = 0x01;    // RO, 0x0100
inline constexpr std::uint8_t kScratch = 0x02;    // RW
inline constexpr std::uint8_t kPopDigest = 0x03;  // RO, set on population load

inline constexpr std::uint16_t kChipIdValue = 0x1712;
inline constexpr std::uint16_t kVersionValue = 0x0100;

inline constexpr std::uint8_t kBankStride = 0x30;
inline constexpr std::uint8_t bank_base(int sub) {
    return static_cast<std::uint8_t>(0x10 + kBankStride * sub);
}

// Offsets within a sub-array bank.
inline constexpr std::uint8_t kRowAddr = 0x00;     // 9-bit gray row address
inline constexpr std::uint8_t kColAddr = 0x01;     // 9-bit: set<<4 | col_in_set
inline constexpr std::uint8_t kDacCode = 0x02;     // 8-bit, single-cell ops
inline constexpr std::uint8_t kPolarity = 0x03;    // 1-bit: 0 fwd, 1 rev
inline constexpr std::uint8_t kPulseWidth = 0x04;  // 16-bit ticks, >= 1
inline constexpr std::uint8_t kThreshold = 0x05;   // 12-bit, ADC voltage scale
inline constexpr std::uint8_t kOpMode = 0x06;      // 2-bit, see kOp* below
inline constexpr std::uint8_t kGo = 0x07;          // strobe, reads as 0
inline constexpr std::uint8_t kStatus = 0x08;      // RO: bit0 busy, bit1 done
inline constexpr std::uint8_t kFrameCount = 0x09;  // RO: frames streamed
inline constexpr std::uint8_t kColSel0 = 0x0A;     // 8 regs, 4 sets x 4 bits
inline constexpr std::uint8_t kDacSet0 = 0x12;     // 16 regs, 2 sets x 8 bits
inline constexpr std::uint8_t kBankRegCount = 0x22;

inline constexpr std::uint16_t kOpIdle = 0;
inline constexpr std::uint16_t kOpWrite = 1;
inline constexpr std::uint16_t kOpRead = 2;
inline constexpr std::uint16_t kOpReadAll = 3;

inline constexpr std::uint16_t kStatusBusy = 0x0001;
inline constexpr std::uint16_t kStatusDone = 0x0002;

// Default comparator threshold on the ADC scale (~0.1578 V).
inline constexpr std::uint16_t kThresholdReset = 148;

}  // namespace reg

/// One SPI transaction: 25-bit frame, MSB first (1 rw + 8 addr + 16 data).
struct SpiTransaction {
    bool rw = false;  // true = write
    std::uint8_t reg_addr = 0;
    std::uint16_t payload = 0;

    std::uint32_t to_word() const;
    static SpiTransaction from_word(std::uint32_t word);  // throws ParseError
};

/// Tick-level phase breakdown of the last executed operation.
struct TimingReport {
    std::vector<std::pair<std::string, std::uint64_t>> phases;
    std::uint64_t total_ticks() const;
};

// ---------------------------------------------------------------------------
// Behavioral chip: four sub-array units, each with its own register bank,
// FSM, converters and serializer lane. Everything is driven by SPI accesses
// plus an explicit tick clock, and is bit-exactly deterministic.
// ---------------------------------------------------------------------------
class ChipSimulator {
public:
    explicit ChipSimulator(ChipConfig cfg = {});

    const ChipConfig& config() const { return cfg_; }

    /// Register-file access. Writes mask the payload to the field width;
    /// unknown addresses, read-only targets and GO-while-busy throw.
    std::uint16_t spi_access(const SpiTransaction& t);

    std::uint16_t read_register(std::uint8_t addr);
    void write_register(std::uint8_t addr, std::uint16_t value);

    /// Advances all four sub-array FSMs in lockstep.
    void run_ticks(std::uint64_t n);
    /// Advances one sub-array only (independent lanes; used by campaign
    /// workers).
    void run_sub_ticks(int sub, std::uint64_t n);
    void run_sub_until_idle(int sub);

    bool busy(int sub) const;
    std::uint64_t time_ticks(int sub) const;
    double time_seconds(int sub) const { return time_ticks(sub) * kTickSeconds; }

    SubArray& sub_array(int sub);
    const SubArray& sub_array(int sub) const;

    /// Symbols emitted on the sub-array's serial lane since the last drain.
    std::vector<std::uint8_t> drain_symbols(int sub);

    const TimingReport& last_timing(int sub) const;

    std::uint16_t register_checksum(int sub) const;
    void set_population_digest(std::uint16_t digest);
    std::uint16_t population_digest() const { return pop_digest_; }

    /// Comparator threshold currently programmed for a sub-array, in volts.
    double threshold_volts(int sub) const;

private:
    enum class Effect { none, write_pulse, emit };

    struct Phase {
        const char* name;
        std::uint64_t ticks;
        Effect effect;
    };

    struct WriteContext {
        CellAddress addr;
        double v_drive = 0.0;
        Polarity pol = Polarity::Forward;
        std::uint16_t width_ticks = 1;
    };

    struct Unit {
        SubArray array;
        std::array<std::uint16_t, reg::kBankRegCount> regs{};
        bool busy = false;
        bool done = false;
        std::uint16_t active_op = 0;
        std::uint64_t time_ticks = 0;
        std::uint16_t frame_count = 0;
        std::uint8_t seq = 0;
        std::vector<Phase> schedule;
        std::size_t phase_index = 0;
        std::uint64_t phase_consumed = 0;
        WriteContext pending_write;
        std::vector<std::uint8_t> pending_symbols;
        std::vector<std::uint8_t> out_symbols;
        TimingReport last_timing;
        Frame frame{};
        std::uint64_t noise_stream = 0;  // draw counter for the noise option
    };

    void start_operation(int sub, std::uint16_t op);
    void start_write(int sub);
    void start_read(int sub);
    void start_read_all(int sub);
    void step_unit(int sub, std::uint64_t n);
    void finish_operation(Unit& u);
    void apply_effect(int sub, Effect e);

    /// Runs one conversion on the addressed cell, applying the read voltage
    /// to the device first (a read can disturb a bistable cell).
    ReadoutResult convert_cell(int sub, const CellAddress& addr, double v_drive,
                               Polarity pol, double dwell_s, int* stages_used);

    double noise_draw(int sub);
    ResistorBank effective_bank(int sub) const;
    std::uint16_t bank_reg(int sub, std::uint8_t offset) const;
    int col_sel(int sub, int set) const;
    std::uint8_t dac_set(int sub, int set) const;

    ChipConfig cfg_;
    std::array<Unit, kNumSubArrays> units_;
    std::uint16_t scratch_ = 0;
    std::uint16_t pop_digest_ = 0;
    int adc_ticks_ = 800;
};

}  // namespace rramchar
