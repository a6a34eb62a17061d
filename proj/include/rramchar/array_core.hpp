#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rramchar/analog_frontend.hpp"
#include "rramchar/config.hpp"
#include "rramchar/device_models.hpp"

namespace rramchar {

struct CellAddress {
    int sub_array = 0;
    int row = 0;
    int col = 0;

    int set_index() const { return col / kColsPerSet; }
    int col_in_set() const { return col % kColsPerSet; }

    void validate() const;  // throws RangeError when out of bounds
    bool operator==(const CellAddress&) const = default;
};

enum class Polarity : std::uint8_t {
    Forward,  // P driven high, N at 0: +v across the device
    Reverse,  // N driven high, P at 0: -v across the device
};

std::uint16_t gray_encode(std::uint16_t n);  // 9-bit reflected gray
std::uint16_t gray_decode(std::uint16_t g);

/// One 512x512 sub-array: per-cell device model + state, the single enabled
/// row, and the per-set column selections.
class SubArray {
public:
    struct Cell {
        DeviceModelSpec spec;
        DeviceState state;
    };

    explicit SubArray(const CellElectrical& cell = {});

    Cell& cell(int row, int col);
    const Cell& cell(int row, int col) const;

    const CellElectrical& electrical() const { return electrical_; }
    void set_electrical(const CellElectrical& e) { electrical_ = e; }

    /// Row decoder: gray_addr is decoded and the row enabled while select is
    /// asserted. Only one row can ever be enabled.
    void select_row(std::uint16_t gray_addr, bool select);
    std::optional<int> enabled_row() const { return enabled_row_; }

    void select_column(int set, int col_in_set);
    int selected_column(int set) const;

    /// Equivalent source at the converter input for the addressed cell.
    /// Requires the cell's row to be enabled; a deselected column yields the
    /// open leakage path instead of an error.
    TheveninSource drive_cell(const CellAddress& addr, double v_drive_volts,
                              Polarity pol) const;

    /// DUT voltage for a given drive with the bank stage resistance in the
    /// loop (reads) or without it (writes). Signed by polarity.
    double dut_voltage(const CellAddress& addr, double v_drive_volts, Polarity pol,
                       double r_bank_ohms) const;

private:
    std::vector<Cell> cells_;
    CellElectrical electrical_;
    std::optional<int> enabled_row_;
    std::array<std::uint8_t, kNumSets> selected_col_per_set_{};
};

/// Functional model of the chip-wide parallel read: one address per set,
/// each set's converter runs independently. Addresses within a sub-array
/// must share one row (single row decoder); two addresses in the same set
/// conflict. Results come back in input order.
std::vector<ReadoutResult> parallel_read(std::span<SubArray, kNumSubArrays> arrays,
                                         const std::vector<CellAddress>& addresses,
                                         double v_read_volts,
                                         const ResistorBank& bank,
                                         const AdcConfig& adc);

}  // namespace rramchar
