#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rramchar/array_core.hpp"
#include "rramchar/config.hpp"
#include "rramchar/device_models.hpp"

namespace rramchar {

class ChipSimulator;

// Deterministic RNG helpers on top of mt19937_64. The raw engine output is
// mapped by hand (53-bit uniform, Box-Muller normal) so a population file
// plus seed reproduces the same devices on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    /// Box-Muller; always consumes exactly two engine draws.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

enum class InitialState : std::uint8_t { High, Low };

/// Generator parameters for cells without an explicit entry.
struct PopulationDefaults {
    DeviceVariant variant = DeviceVariant::LinearResistor;
    // Linear resistors: log-uniform in [r_min, r_max].
    double r_min_ohms = 1e6;
    double r_max_ohms = 1e6;
    // Memristors: nominal levels, optionally spread log-normally per cell.
    double r_low_ohms = 1e4;
    double r_high_ohms = 1e6;
    double sigma_log = 0.0;
    double v_set_volts = 1.5;
    double v_reset_volts = 1.5;
    double min_switch_width_s = 10e-9;
    InitialState initial = InitialState::High;
};

struct DefectRates {
    double stuck_open_frac = 0.0;
    double stuck_short_frac = 0.0;
};

/// Explicit per-cell override, applied after the seeded defaults.
struct CellEntry {
    CellAddress addr;
    DeviceModelSpec spec;
    bool start_high = true;
};

struct PopulationSpec {
    std::uint64_t seed = 0;
    PopulationDefaults defaults;
    DefectRates defects;
    std::vector<CellEntry> cells;

    void validate() const;

    static PopulationSpec from_json_text(const std::string& text);
    static PopulationSpec from_json_file(const std::string& path);
    std::string to_json_text() const;
};

/// Materializes the population into all four sub-arrays. Every cell consumes
/// a fixed number of RNG draws in (sub, row, col) order, so the layout is a
/// pure function of (spec, seed). Returns the 16-bit digest of the realized
/// population and latches it into the chip's POP_DIGEST register.
std::uint16_t populate_chip(ChipSimulator& chip, const PopulationSpec& spec);

/// Digest over every cell's model and initial state.
std::uint16_t population_digest(const ChipSimulator& chip);

}  // namespace rramchar
