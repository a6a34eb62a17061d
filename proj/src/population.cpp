#include "rramchar/population.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rramchar/controller.hpp"
#include "rramchar/errors.hpp"
#include "rramchar/hash.hpp"

namespace rramchar {

using nlohmann::json;

void PopulationSpec::validate() const {
    auto frac_ok = [](double f) { return std::isfinite(f) && f >= 0.0 && f <= 1.0; };
    if (!frac_ok(defects.stuck_open_frac) || !frac_ok(defects.stuck_short_frac) ||
        defects.stuck_open_frac + defects.stuck_short_frac > 1.0)
        throw UsageError("defect fractions must lie in [0,1] and sum to at most 1");

    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(defaults.r_min_ohms) || !positive(defaults.r_max_ohms) ||
        defaults.r_min_ohms > defaults.r_max_ohms)
        throw UsageError("population r_min/r_max range invalid");
    if (!positive(defaults.r_low_ohms) || !positive(defaults.r_high_ohms) ||
        defaults.r_low_ohms >= defaults.r_high_ohms)
        throw UsageError("population memristor levels invalid");
    if (defaults.sigma_log < 0.0 || !std::isfinite(defaults.sigma_log))
        throw UsageError("population sigma_log invalid");
    if (!positive(defaults.v_set_volts) || !positive(defaults.v_reset_volts))
        throw UsageError("population switching thresholds invalid");
    if (!positive(defaults.min_switch_width_s))
        throw UsageError("population min switch width invalid");

    for (const auto& e : cells) e.addr.validate();
}

namespace {

DeviceVariant parse_variant(const std::string& s) {
    if (s == "linear") return DeviceVariant::LinearResistor;
    if (s == "memristor") return DeviceVariant::BistableMemristor;
    if (s == "defective") return DeviceVariant::Defective;
    throw ParseError("unknown device variant: " + s);
}

const char* variant_name(DeviceVariant v) {
    switch (v) {
        case DeviceVariant::LinearResistor: return "linear";
        case DeviceVariant::BistableMemristor: return "memristor";
        case DeviceVariant::Defective: return "defective";
    }
    return "linear";
}

InitialState parse_initial(const std::string& s) {
    if (s == "high") return InitialState::High;
    if (s == "low") return InitialState::Low;
    throw ParseError("initial state must be \"high\" or \"low\"");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PopulationSpec PopulationSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("population JSON: ") + e.what());
    }

    PopulationSpec spec;
    try {
        maybe(j, "seed", spec.seed);
        if (j.contains("default")) {
            const auto& d = j["default"];
            if (d.contains("variant"))
                spec.defaults.variant = parse_variant(d["variant"].get<std::string>());
            maybe(d, "r_min_ohms", spec.defaults.r_min_ohms);
            maybe(d, "r_max_ohms", spec.defaults.r_max_ohms);
            maybe(d, "r_low_ohms", spec.defaults.r_low_ohms);
            maybe(d, "r_high_ohms", spec.defaults.r_high_ohms);
            maybe(d, "sigma_log", spec.defaults.sigma_log);
            maybe(d, "v_set_volts", spec.defaults.v_set_volts);
            maybe(d, "v_reset_volts", spec.defaults.v_reset_volts);
            maybe(d, "min_switch_width_s", spec.defaults.min_switch_width_s);
            if (d.contains("initial"))
                spec.defaults.initial = parse_initial(d["initial"].get<std::string>());
        }
        if (j.contains("defects")) {
            const auto& d = j["defects"];
            maybe(d, "stuck_open_frac", spec.defects.stuck_open_frac);
            maybe(d, "stuck_short_frac", spec.defects.stuck_short_frac);
        }
        for (const auto& c : j.value("cells", json::array())) {
            CellEntry e;
            e.addr.sub_array = c.at("sub").get<int>();
            e.addr.row = c.at("row").get<int>();
            e.addr.col = c.at("col").get<int>();
            const auto variant = parse_variant(c.value("variant", "linear"));
            e.spec.variant = variant;
            switch (variant) {
                case DeviceVariant::LinearResistor:
                    e.spec.resistance_ohms = c.at("r_ohms").get<double>();
                    break;
                case DeviceVariant::BistableMemristor:
                    e.spec.r_low_ohms = c.at("r_low_ohms").get<double>();
                    e.spec.r_high_ohms = c.at("r_high_ohms").get<double>();
                    maybe(c, "v_set_volts", e.spec.v_set_volts);
                    maybe(c, "v_reset_volts", e.spec.v_reset_volts);
                    maybe(c, "min_switch_width_s", e.spec.min_switch_width_s);
                    e.spec.resistance_ohms = e.spec.r_high_ohms;
                    break;
                case DeviceVariant::Defective: {
                    const auto kind = c.at("kind").get<std::string>();
                    if (kind == "stuck_open")
                        e.spec.defect_kind = DefectKind::StuckOpen;
                    else if (kind == "stuck_short")
                        e.spec.defect_kind = DefectKind::StuckShort;
                    else
                        throw ParseError("unknown defect kind: " + kind);
                    // Resistance is resolved against the chip config at
                    // materialization time.
                    e.spec.resistance_ohms = 1.0;
                    break;
                }
            }
            if (c.contains("initial"))
                e.start_high = parse_initial(c["initial"].get<std::string>()) ==
                               InitialState::High;
            spec.cells.push_back(e);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("population JSON: ") + e.what());
    }

    spec.validate();
    return spec;
}

PopulationSpec PopulationSpec::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open population file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string PopulationSpec::to_json_text() const {
    json j;
    j["version"] = 1;
    j["seed"] = seed;
    j["default"] = {
        {"variant", variant_name(defaults.variant)},
        {"r_min_ohms", defaults.r_min_ohms},
        {"r_max_ohms", defaults.r_max_ohms},
        {"r_low_ohms", defaults.r_low_ohms},
        {"r_high_ohms", defaults.r_high_ohms},
        {"sigma_log", defaults.sigma_log},
        {"v_set_volts", defaults.v_set_volts},
        {"v_reset_volts", defaults.v_reset_volts},
        {"min_switch_width_s", defaults.min_switch_width_s},
        {"initial", defaults.initial == InitialState::High ? "high" : "low"},
    };
    j["defects"] = {{"stuck_open_frac", defects.stuck_open_frac},
                    {"stuck_short_frac", defects.stuck_short_frac}};
    json arr = json::array();
    for (const auto& e : cells) {
        json c = {{"sub", e.addr.sub_array}, {"row", e.addr.row}, {"col", e.addr.col}};
        c["variant"] = variant_name(e.spec.variant);
        switch (e.spec.variant) {
            case DeviceVariant::LinearResistor:
                c["r_ohms"] = e.spec.resistance_ohms;
                break;
            case DeviceVariant::BistableMemristor:
                c["r_low_ohms"] = e.spec.r_low_ohms;
                c["r_high_ohms"] = e.spec.r_high_ohms;
                c["v_set_volts"] = e.spec.v_set_volts;
                c["v_reset_volts"] = e.spec.v_reset_volts;
                c["min_switch_width_s"] = e.spec.min_switch_width_s;
                c["initial"] = e.start_high ? "high" : "low";
                break;
            case DeviceVariant::Defective:
                c["kind"] = e.spec.defect_kind == DefectKind::StuckOpen
                                ? "stuck_open"
                                : "stuck_short";
                break;
        }
        arr.push_back(c);
    }
    j["cells"] = arr;
    return j.dump(2) + "\n";
}

std::uint16_t populate_chip(ChipSimulator& chip, const PopulationSpec& spec) {
    spec.validate();
    const ChipConfig& cfg = chip.config();
    const auto& d = spec.defaults;
    const double log_lo = std::log(d.r_min_ohms);
    const double log_hi = std::log(d.r_max_ohms);

    Rng rng(spec.seed);
    for (int sub = 0; sub < kNumSubArrays; ++sub) {
        SubArray& arr = chip.sub_array(sub);
        for (int row = 0; row < kNumRows; ++row) {
            for (int col = 0; col < kNumCols; ++col) {
                // Fixed draw budget per cell keeps the stream aligned no
                // matter which branch a cell takes.
                const double u_def = rng.uniform01();
                const double u_r = rng.uniform01();
                const double z1 = rng.normal();
                const double z2 = rng.normal();

                SubArray::Cell& cell = arr.cell(row, col);
                if (u_def < spec.defects.stuck_open_frac) {
                    cell.spec = DeviceModelSpec::defective(DefectKind::StuckOpen, cfg);
                } else if (u_def <
                           spec.defects.stuck_open_frac + spec.defects.stuck_short_frac) {
                    cell.spec = DeviceModelSpec::defective(DefectKind::StuckShort, cfg);
                } else if (d.variant == DeviceVariant::BistableMemristor) {
                    double r_low = d.r_low_ohms * std::exp(d.sigma_log * z1);
                    double r_high = d.r_high_ohms * std::exp(d.sigma_log * z2);
                    // Extreme spreads can cross the levels; preserve the
                    // nominal window ratio instead.
                    if (r_high <= r_low)
                        r_high = r_low * (d.r_high_ohms / d.r_low_ohms);
                    cell.spec = DeviceModelSpec::memristor(r_low, r_high, d.v_set_volts,
                                                           d.v_reset_volts,
                                                           d.min_switch_width_s);
                } else {
                    const double r = std::exp(log_lo + u_r * (log_hi - log_lo));
                    cell.spec = DeviceModelSpec::linear(r);
                }
                cell.state =
                    initial_state(cell.spec, d.initial == InitialState::High);
            }
        }
    }

    for (const auto& e : spec.cells) {
        SubArray::Cell& cell = chip.sub_array(e.addr.sub_array).cell(e.addr.row, e.addr.col);
        cell.spec = e.spec;
        if (e.spec.variant == DeviceVariant::Defective)
            cell.spec = DeviceModelSpec::defective(e.spec.defect_kind, cfg);
        cell.spec.validate();
        cell.state = initial_state(cell.spec, e.start_high);
    }

    const std::uint16_t digest = population_digest(chip);
    chip.set_population_digest(digest);
    return digest;
}

std::uint16_t population_digest(const ChipSimulator& chip) {
    Fnv64 h;
    for (int sub = 0; sub < kNumSubArrays; ++sub) {
        const SubArray& arr = chip.sub_array(sub);
        for (int row = 0; row < kNumRows; ++row) {
            for (int col = 0; col < kNumCols; ++col) {
                const auto& cell = arr.cell(row, col);
                h.update_u8(static_cast<std::uint8_t>(cell.spec.variant));
                h.update_u8(static_cast<std::uint8_t>(cell.spec.defect_kind));
                h.update_double(cell.spec.resistance_ohms);
                h.update_double(cell.spec.r_low_ohms);
                h.update_double(cell.spec.r_high_ohms);
                h.update_double(cell.state.current_resistance_ohms);
            }
        }
    }
    return fold16(h.h);
}

}  // namespace rramchar
