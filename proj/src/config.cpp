#include "rramchar/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rramchar/errors.hpp"
#include "rramchar/hash.hpp"

namespace rramchar {

using nlohmann::json;

int TimingConfig::adc_conversion_ticks(const AdcConfig& adc) const {
    // One sample period of the converter, expressed in controller ticks.
    const double ticks = 1.0 / (adc.sample_rate_hz * kTickSeconds);
    return static_cast<int>(std::lround(ticks));
}

void ChipConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };

    if (dac.bits < 1 || dac.bits > 16) throw UsageError("dac.bits out of range");
    if (!(dac.v_max_volts > dac.v_min_volts))
        throw UsageError("dac voltage range is empty");
    if (adc.bits < 1 || adc.bits > 16) throw UsageError("adc.bits out of range");
    if (!(adc.v_hi_volts > adc.v_lo_volts))
        throw UsageError("adc voltage range is empty");
    if (!positive(adc.sample_rate_hz)) throw UsageError("adc sample rate invalid");

    double prev = 0.0;
    for (double r : bank.r_ohms) {
        if (!positive(r)) throw UsageError("bank resistor must be positive");
        if (r <= prev) throw UsageError("bank resistors must increase per stage");
        prev = r;
    }
    if (!positive(bank.amp_gain)) throw UsageError("amplifier gain invalid");
    if (!positive(bank.v_threshold_volts))
        throw UsageError("comparator threshold invalid");

    if (!positive(cell.r_access_on_ohms) || !positive(cell.r_off_ohms))
        throw UsageError("cell path resistances must be positive");
    if (cell.r_off_ohms <= cell.r_access_on_ohms)
        throw UsageError("leakage path must exceed the access resistance");

    if (timing.setup_ticks < 0) throw UsageError("setup_ticks negative");
    for (int t : timing.sample_ticks)
        if (t < 1) throw UsageError("sample_ticks must be >= 1");
    for (int t : timing.amplify_ticks)
        if (t < 1) throw UsageError("amplify_ticks must be >= 1");
    if (timing.serializer_cycle_ticks < 1)
        throw UsageError("serializer_cycle_ticks must be >= 1");
    if (timing.adc_conversion_ticks(adc) < 1)
        throw UsageError("adc conversion shorter than one tick");

    if (noise.sigma_amps < 0.0 || !std::isfinite(noise.sigma_amps))
        throw UsageError("noise sigma invalid");

    if (!positive(stuck_short_ohms) || !positive(stuck_open_ohms) ||
        stuck_short_ohms >= stuck_open_ohms)
        throw UsageError("defect resistances invalid");
    if (!positive(default_min_switch_width_s))
        throw UsageError("default min switch width invalid");
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ChipConfig ChipConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config JSON: ") + e.what());
    }

    ChipConfig cfg;
    try {
        if (j.contains("dac")) {
            const auto& d = j["dac"];
            maybe(d, "bits", cfg.dac.bits);
            maybe(d, "v_min_volts", cfg.dac.v_min_volts);
            maybe(d, "v_max_volts", cfg.dac.v_max_volts);
        }
        if (j.contains("adc")) {
            const auto& a = j["adc"];
            maybe(a, "bits", cfg.adc.bits);
            maybe(a, "v_lo_volts", cfg.adc.v_lo_volts);
            maybe(a, "v_hi_volts", cfg.adc.v_hi_volts);
            maybe(a, "sample_rate_hz", cfg.adc.sample_rate_hz);
        }
        if (j.contains("bank")) {
            const auto& b = j["bank"];
            if (b.contains("r_ohms")) {
                const auto& arr = b["r_ohms"];
                if (!arr.is_array() || arr.size() != cfg.bank.r_ohms.size())
                    throw ParseError("bank.r_ohms must list exactly 5 stages");
                for (std::size_t i = 0; i < cfg.bank.r_ohms.size(); ++i)
                    cfg.bank.r_ohms[i] = arr[i].get<double>();
            }
            maybe(b, "amp_gain", cfg.bank.amp_gain);
            maybe(b, "v_threshold_volts", cfg.bank.v_threshold_volts);
        }
        if (j.contains("cell")) {
            const auto& c = j["cell"];
            maybe(c, "r_access_on_ohms", cfg.cell.r_access_on_ohms);
            maybe(c, "r_off_ohms", cfg.cell.r_off_ohms);
        }
        if (j.contains("timing")) {
            const auto& t = j["timing"];
            maybe(t, "setup_ticks", cfg.timing.setup_ticks);
            auto load5 = [&](const char* key, std::array<int, 5>& out) {
                if (!t.contains(key)) return;
                const auto& arr = t[key];
                if (!arr.is_array() || arr.size() != out.size())
                    throw ParseError(std::string("timing.") + key +
                                     " must list exactly 5 stages");
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = arr[i].get<int>();
            };
            load5("sample_ticks", cfg.timing.sample_ticks);
            load5("amplify_ticks", cfg.timing.amplify_ticks);
            maybe(t, "serializer_cycle_ticks", cfg.timing.serializer_cycle_ticks);
        }
        if (j.contains("noise")) {
            const auto& n = j["noise"];
            maybe(n, "enabled", cfg.noise.enabled);
            maybe(n, "sigma_amps", cfg.noise.sigma_amps);
            maybe(n, "seed", cfg.noise.seed);
        }
        if (j.contains("defaults")) {
            const auto& d = j["defaults"];
            maybe(d, "stuck_short_ohms", cfg.stuck_short_ohms);
            maybe(d, "stuck_open_ohms", cfg.stuck_open_ohms);
            maybe(d, "min_switch_width_s", cfg.default_min_switch_width_s);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config JSON: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

ChipConfig ChipConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string ChipConfig::to_json_text() const {
    json j;
    j["dac"] = {{"bits", dac.bits},
                {"v_min_volts", dac.v_min_volts},
                {"v_max_volts", dac.v_max_volts}};
    j["adc"] = {{"bits", adc.bits},
                {"v_lo_volts", adc.v_lo_volts},
                {"v_hi_volts", adc.v_hi_volts},
                {"sample_rate_hz", adc.sample_rate_hz}};
    j["bank"] = {{"r_ohms", bank.r_ohms},
                 {"amp_gain", bank.amp_gain},
                 {"v_threshold_volts", bank.v_threshold_volts}};
    j["cell"] = {{"r_access_on_ohms", cell.r_access_on_ohms},
                 {"r_off_ohms", cell.r_off_ohms}};
    j["timing"] = {{"setup_ticks", timing.setup_ticks},
                   {"sample_ticks", timing.sample_ticks},
                   {"amplify_ticks", timing.amplify_ticks},
                   {"serializer_cycle_ticks", timing.serializer_cycle_ticks}};
    j["noise"] = {{"enabled", noise.enabled},
                  {"sigma_amps", noise.sigma_amps},
                  {"seed", noise.seed}};
    j["defaults"] = {{"stuck_short_ohms", stuck_short_ohms},
                     {"stuck_open_ohms", stuck_open_ohms},
                     {"min_switch_width_s", default_min_switch_width_s}};
    return j.dump(2) + "\n";
}

std::uint16_t ChipConfig::digest16() const {
    Fnv64 h;
    h.update_str(to_json_text());
    return fold16(h.h);
}

}  // namespace rramchar
