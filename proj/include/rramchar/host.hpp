#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rramchar/analog_frontend.hpp"
#include "rramchar/array_core.hpp"
#include "rramchar/controller.hpp"

namespace rramchar {

inline constexpr std::uint8_t kFlagSatLow = 0x01;
inline constexpr std::uint8_t kFlagSatHigh = 0x02;

/// One decoded measurement, reconstructed host-side from a data packet.
struct MeasurementRecord {
    CellAddress address;
    Polarity polarity = Polarity::Forward;
    double v_dut_volts = 0.0;  // signed estimate across the device
    std::uint8_t dac_code = 0;
    std::uint16_t adc_code = 0;
    std::uint8_t gain_sel = 0;
    double i_amps = 0.0;  // signed reconstructed current
    double r_ohms = 0.0;  // resistance estimate (positive)
    std::uint8_t flags = 0;
    double sim_time_s = 0.0;
    double r_true_ohms = -1.0;  // simulator ground truth; < 0 when not attached

    bool flagged() const { return flags != 0; }
};

std::string measurement_csv_header();
std::string measurement_csv_row(const MeasurementRecord& r);

enum class CampaignKind { ReadResistance, WritePulse, IvSweep, MassCharacterize };
enum class PolarityMode { Forward, Reverse, Both };

/// Inclusive address rectangle within one sub-array.
struct AddressSpan {
    int sub_array = 0;
    int row_first = 0, row_last = kNumRows - 1;
    int col_first = 0, col_last = kNumCols - 1;

    void validate() const;
    std::size_t cell_count() const;
};

struct CampaignSpec {
    CampaignKind kind = CampaignKind::MassCharacterize;
    std::vector<AddressSpan> spans;
    PolarityMode polarity_mode = PolarityMode::Forward;

    // IV sweep grid (voltage magnitudes at the DUT).
    double v_start_volts = 0.05;
    double v_stop_volts = 1.5;
    double v_step_volts = 0.05;
    bool hysteresis_loop = false;

    // Read / mass readout.
    double v_read_volts = 0.5;

    // Write pulses.
    double v_write_volts = 1.8;
    double pulse_width_s = 100e-9;

    int jobs = 1;  // parallel workers for mass readout, sharded by sub-array
    bool attach_ground_truth = true;

    void validate() const;
};

struct MassSummary {
    std::size_t total = 0;
    std::size_t flagged = 0;
    std::size_t true_defects = 0;      // ground-truth defective cells touched
    double frac_within_1pct = 0.0;     // unflagged cells vs ground truth
    double frac_within_3pct = 0.0;
    double max_rel_err = 0.0;
    std::array<std::size_t, 8> decade_hist{};  // r < 1e3, 1e3..1e4, ... >= 1e9
    double wall_seconds = 0.0;

    std::string to_text() const;
};

/// Series chain the host solves against when choosing a DAC code.
struct DriveChain {
    CellElectrical cell;
    ResistorBank bank;
    DacConfig dac;
    AdcConfig adc;
    double v_threshold_volts = 0.0;  // comparator threshold in effect
    bool include_bank = true;        // false for write path (no converter)
};

/// Smallest DAC code whose solved divider puts at least v_dut_target across a
/// DUT of the estimated resistance. Throws RangeError when out of DAC range.
std::uint8_t solve_drive_voltage(double r_estimate_ohms, double v_dut_target,
                                 const DriveChain& chain);

struct ReplayResult {
    std::size_t transactions = 0;
    std::size_t operations = 0;
    std::uint64_t bitstream_hash = 0;
    bool integrity_ok = true;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Host-side driver. Owns no chip state: everything goes through the SPI
// register interface, and all measurements come back through the serial
// bitstream decoder. Optionally records every SPI word to a transcript and
// captures the raw serial symbols per sub-array.
// ---------------------------------------------------------------------------
class Driver {
public:
    explicit Driver(ChipSimulator& chip);
    ~Driver();

    ChipSimulator& chip() { return chip_; }

    std::uint16_t spi(bool rw, std::uint8_t addr, std::uint16_t payload);

    /// Starts the FSM and advances that sub-array's clock until idle,
    /// draining the emitted serial symbols.
    std::vector<std::uint8_t> go_and_wait(int sub);

    void start_transcript(const std::string& path);
    void stop_transcript();
    bool transcript_active() const { return transcript_ != nullptr; }

    void set_trace_enabled(bool on) { trace_enabled_ = on; }
    const std::vector<std::uint8_t>& trace_symbols(int sub) const;
    std::uint64_t bitstream_hash() const;
    void save_trace(int sub, const std::string& path, std::uint8_t mode,
                    std::uint8_t packet_index = 0) const;

    // --- single-cell operations -------------------------------------------
    MeasurementRecord read_cell(const CellAddress& addr, double v_read,
                                Polarity pol = Polarity::Forward);
    /// Applies one pulse aiming for v_dut_target across the device.
    /// r_estimate defaults to the low end of the supported range, which
    /// over- rather than under-drives unknown devices.
    void write_cell(const CellAddress& addr, double v_dut_target, Polarity pol,
                    double width_s, double r_estimate_ohms = 1e3);

    std::vector<MeasurementRecord> run_iv_sweep(const CellAddress& addr,
                                                const CampaignSpec& spec);
    std::vector<MeasurementRecord> run_hysteresis_loop(const CellAddress& addr,
                                                       const CampaignSpec& spec);

    /// Frame-based readout of every cell in the spans. Records come back in
    /// span order, row-major within a span. With spec.jobs > 1 the four
    /// sub-arrays run on worker threads; results are identical to the
    /// sequential schedule except for sim_time_s.
    std::vector<MeasurementRecord> mass_characterize(const CampaignSpec& spec);

    static MassSummary summarize(const std::vector<MeasurementRecord>& records,
                                 double wall_seconds = 0.0);

    /// Applies a recorded transcript to the attached chip. GO writes advance
    /// the addressed sub-array to idle, mirroring the recording discipline.
    ReplayResult replay_transcript(const std::string& path,
                                   std::vector<MeasurementRecord>* decoded = nullptr);

    DriveChain read_chain(int sub) const;
    DriveChain write_chain() const;

private:
    struct PendingOp {
        int sub;
        std::uint16_t op_mode;
    };

    void record_word(std::uint32_t word);
    void absorb_symbols(int sub, const std::vector<std::uint8_t>& symbols);
    std::uint16_t spi_cached(int sub, std::uint8_t offset, std::uint16_t value);
    void program_common(const CellAddress& addr, std::uint8_t dac_code,
                        Polarity pol);
    MeasurementRecord decode_single(int sub, const std::vector<std::uint8_t>& symbols,
                                    const CellAddress& addr, std::uint8_t dac_code,
                                    Polarity pol);
    MeasurementRecord reconstruct(const DataPacket& pkt, const CellAddress& addr,
                                  std::uint8_t dac_code, Polarity pol,
                                  double threshold_volts, double sim_time_s);
    void mass_worker(int sub, const CampaignSpec& spec,
                     std::vector<std::vector<MeasurementRecord>>& span_outputs);

    ChipSimulator& chip_;
    std::unique_ptr<std::ofstream> transcript_;
    std::mutex spi_mutex_;
    bool trace_enabled_ = false;
    std::array<std::vector<std::uint8_t>, kNumSubArrays> trace_;
    // Cache of DACSET/COLSEL register values to skip redundant SPI writes
    // inside frame campaigns.
    std::array<std::array<std::optional<std::uint16_t>, reg::kBankRegCount>,
               kNumSubArrays>
        reg_cache_{};
};

}  // namespace rramchar
