#include "rramchar/array_core.hpp"

#include <map>
#include <string>

#include "rramchar/errors.hpp"

namespace rramchar {

void CellAddress::validate() const {
    if (sub_array < 0 || sub_array >= kNumSubArrays)
        throw RangeError("sub-array index out of range: " + std::to_string(sub_array));
    if (row < 0 || row >= kNumRows)
        throw RangeError("row out of range: " + std::to_string(row));
    if (col < 0 || col >= kNumCols)
        throw RangeError("column out of range: " + std::to_string(col));
}

std::uint16_t gray_encode(std::uint16_t n) {
    if (n >= kNumRows) throw RangeError("row address out of range");
    return static_cast<std::uint16_t>(n ^ (n >> 1));
}

std::uint16_t gray_decode(std::uint16_t g) {
    if (g >= kNumRows) throw RangeError("gray address out of range");
    std::uint16_t n = g;
    for (std::uint16_t shift = 1; shift < 16; shift <<= 1) n ^= n >> shift;
    return n;
}

SubArray::SubArray(const CellElectrical& cell) : electrical_(cell) {
    cells_.resize(static_cast<std::size_t>(kNumRows) * kNumCols);
}

SubArray::Cell& SubArray::cell(int row, int col) {
    if (row < 0 || row >= kNumRows || col < 0 || col >= kNumCols)
        throw RangeError("cell index out of range");
    return cells_[static_cast<std::size_t>(row) * kNumCols + col];
}

const SubArray::Cell& SubArray::cell(int row, int col) const {
    return const_cast<SubArray*>(this)->cell(row, col);
}

void SubArray::select_row(std::uint16_t gray_addr, bool select) {
    if (!select) {
        enabled_row_ = std::nullopt;
        return;
    }
    enabled_row_ = static_cast<int>(gray_decode(gray_addr));
}

void SubArray::select_column(int set, int col_in_set) {
    if (set < 0 || set >= kNumSets) throw RangeError("set index out of range");
    if (col_in_set < 0 || col_in_set >= kColsPerSet)
        throw RangeError("column-in-set index out of range");
    selected_col_per_set_[set] = static_cast<std::uint8_t>(col_in_set);
}

int SubArray::selected_column(int set) const {
    if (set < 0 || set >= kNumSets) throw RangeError("set index out of range");
    return selected_col_per_set_[set];
}

TheveninSource SubArray::drive_cell(const CellAddress& addr, double v_drive_volts,
                                    Polarity) const {
    addr.validate();
    if (!enabled_row_ || *enabled_row_ != addr.row)
        throw RangeError("selection error: row " + std::to_string(addr.row) +
                         " is not enabled");
    const bool selected =
        selected_col_per_set_[addr.set_index()] == addr.col_in_set();
    const Cell& c = cells_[static_cast<std::size_t>(addr.row) * kNumCols + addr.col];
    return TheveninSource{v_drive_volts,
                          cell_path_resistance(c.state, electrical_, selected)};
}

double SubArray::dut_voltage(const CellAddress& addr, double v_drive_volts,
                             Polarity pol, double r_bank_ohms) const {
    addr.validate();
    const Cell& c = cells_[static_cast<std::size_t>(addr.row) * kNumCols + addr.col];
    const double r_dev = c.state.current_resistance_ohms;
    const double v =
        v_drive_volts * r_dev / (r_dev + electrical_.r_access_on_ohms + r_bank_ohms);
    return pol == Polarity::Forward ? v : -v;
}

std::vector<ReadoutResult> parallel_read(std::span<SubArray, kNumSubArrays> arrays,
                                         const std::vector<CellAddress>& addresses,
                                         double v_read_volts, const ResistorBank& bank,
                                         const AdcConfig& adc) {
    // One converter per set: reject two addresses landing on the same one,
    // and rows must agree within a sub-array (single row decoder each).
    std::map<std::pair<int, int>, int> used_set;
    std::map<int, int> row_of;
    for (const auto& a : addresses) {
        a.validate();
        const auto key = std::make_pair(a.sub_array, a.set_index());
        if (!used_set.emplace(key, a.row).second)
            throw RangeError("parallel read: set conflict in sub-array " +
                             std::to_string(a.sub_array) + ", set " +
                             std::to_string(a.set_index()));
        auto [it, fresh] = row_of.emplace(a.sub_array, a.row);
        if (!fresh && it->second != a.row)
            throw RangeError("parallel read: conflicting rows in sub-array " +
                             std::to_string(a.sub_array));
    }

    for (const auto& [sub, row] : row_of)
        arrays[sub].select_row(gray_encode(static_cast<std::uint16_t>(row)), true);
    for (const auto& a : addresses)
        arrays[a.sub_array].select_column(a.set_index(), a.col_in_set());

    std::vector<ReadoutResult> results;
    results.reserve(addresses.size());
    for (const auto& a : addresses) {
        const auto src =
            arrays[a.sub_array].drive_cell(a, v_read_volts, Polarity::Forward);
        results.push_back(autorange_convert(src, bank, adc));
    }

    for (const auto& [sub, row] : row_of) arrays[sub].select_row(0, false);
    return results;
}

}  // namespace rramchar
