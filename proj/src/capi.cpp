#include "rramchar/capi.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "rramchar/controller.hpp"
#include "rramchar/errors.hpp"
#include "rramchar/host.hpp"
#include "rramchar/population.hpp"
#include "rramchar/serializer.hpp"

using namespace rramchar;

struct rc_chip {
    ChipSimulator sim;
    Driver driver;

    explicit rc_chip(ChipConfig cfg) : sim(std::move(cfg)), driver(sim) {}
};

namespace {

thread_local std::string g_last_error;

rc_status set_error(const Error& e) {
    g_last_error = e.what();
    return static_cast<rc_status>(e.code());
}

rc_status set_error(const std::exception& e) {
    g_last_error = e.what();
    return rc_err_usage;
}

template <typename Fn>
rc_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return rc_ok;
    } catch (const Error& e) {
        return set_error(e);
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return rc_err_io;
    } catch (const std::exception& e) {
        return set_error(e);
    }
}

rc_measurement to_c(const MeasurementRecord& m) {
    rc_measurement out{};
    out.sub_array = m.address.sub_array;
    out.row = m.address.row;
    out.col = m.address.col;
    out.polarity = m.polarity == Polarity::Reverse ? 1 : 0;
    out.v_dut_volts = m.v_dut_volts;
    out.dac_code = m.dac_code;
    out.adc_code = m.adc_code;
    out.gain_sel = m.gain_sel;
    out.flags = m.flags;
    out.i_amps = m.i_amps;
    out.r_ohms = m.r_ohms;
    out.sim_time_s = m.sim_time_s;
    out.r_true_ohms = m.r_true_ohms;
    return out;
}

rc_status export_records(const std::vector<MeasurementRecord>& records,
                         rc_measurement** out_records, size_t* out_count) {
    auto* arr = new (std::nothrow) rc_measurement[records.size()];
    if (!arr && !records.empty()) {
        g_last_error = "out of memory";
        return rc_err_io;
    }
    for (std::size_t i = 0; i < records.size(); ++i) arr[i] = to_c(records[i]);
    *out_records = arr;
    *out_count = records.size();
    return rc_ok;
}

rc_status require(bool ok, const char* what) {
    if (ok) return rc_ok;
    g_last_error = what;
    return rc_err_usage;
}

}  // namespace

extern "C" {

const char* rc_last_error(void) { return g_last_error.c_str(); }

const char* rc_version(void) { return "1.0.0"; }

rc_status rc_chip_create(const char* config_json, rc_chip** out) {
    if (rc_status s = require(out != nullptr, "out handle is null")) return s;
    *out = nullptr;
    return guarded([&] {
        ChipConfig cfg;
        if (config_json && *config_json)
            cfg = ChipConfig::from_json_text(config_json);
        *out = new rc_chip(std::move(cfg));
    });
}

rc_status rc_chip_create_from_config_file(const char* path, rc_chip** out) {
    if (rc_status s = require(out && path, "null argument")) return s;
    *out = nullptr;
    return guarded([&] { *out = new rc_chip(ChipConfig::from_json_file(path)); });
}

void rc_chip_destroy(rc_chip* chip) { delete chip; }

rc_status rc_chip_spi(rc_chip* chip, int rw, uint8_t reg_addr, uint16_t payload,
                      uint16_t* out_value) {
    if (rc_status s = require(chip != nullptr, "chip handle is null")) return s;
    return guarded([&] {
        const uint16_t v = chip->driver.spi(rw != 0, reg_addr, payload);
        if (out_value) *out_value = v;
    });
}

rc_status rc_chip_run_ticks(rc_chip* chip, uint64_t ticks) {
    if (rc_status s = require(chip != nullptr, "chip handle is null")) return s;
    return guarded([&] { chip->sim.run_ticks(ticks); });
}

rc_status rc_chip_time_ticks(rc_chip* chip, int sub_array, uint64_t* out) {
    if (rc_status s = require(chip && out, "null argument")) return s;
    return guarded([&] { *out = chip->sim.time_ticks(sub_array); });
}

rc_status rc_chip_populate(rc_chip* chip, const char* population_json,
                           uint64_t seed_override, int use_override,
                           uint16_t* out_digest) {
    if (rc_status s = require(chip && population_json, "null argument")) return s;
    return guarded([&] {
        PopulationSpec spec = PopulationSpec::from_json_text(population_json);
        if (use_override) spec.seed = seed_override;
        const uint16_t digest = populate_chip(chip->sim, spec);
        if (out_digest) *out_digest = digest;
    });
}

rc_status rc_chip_populate_file(rc_chip* chip, const char* path,
                                uint64_t seed_override, int use_override,
                                uint16_t* out_digest) {
    if (rc_status s = require(chip && path, "null argument")) return s;
    return guarded([&] {
        PopulationSpec spec = PopulationSpec::from_json_file(path);
        if (use_override) spec.seed = seed_override;
        const uint16_t digest = populate_chip(chip->sim, spec);
        if (out_digest) *out_digest = digest;
    });
}

rc_status rc_chip_write_cell(rc_chip* chip, int sub_array, int row, int col,
                             double v_dut_volts, int reverse, double width_s) {
    if (rc_status s = require(chip != nullptr, "chip handle is null")) return s;
    return guarded([&] {
        chip->driver.write_cell(CellAddress{sub_array, row, col}, v_dut_volts,
                                reverse ? Polarity::Reverse : Polarity::Forward,
                                width_s);
    });
}

rc_status rc_chip_read_cell(rc_chip* chip, int sub_array, int row, int col,
                            double v_read_volts, int reverse, rc_measurement* out) {
    if (rc_status s = require(chip && out, "null argument")) return s;
    return guarded([&] {
        *out = to_c(chip->driver.read_cell(
            CellAddress{sub_array, row, col}, v_read_volts,
            reverse ? Polarity::Reverse : Polarity::Forward));
    });
}

rc_status rc_chip_iv_sweep(rc_chip* chip, int sub_array, int row, int col,
                           double v_start, double v_stop, double v_step,
                           int polarity_mode, int hysteresis_loop,
                           rc_measurement** out_records, size_t* out_count) {
    if (rc_status s = require(chip && out_records && out_count, "null argument"))
        return s;
    *out_records = nullptr;
    *out_count = 0;
    return guarded([&] {
        if (polarity_mode < 0 || polarity_mode > 2)
            throw UsageError("polarity_mode must be 0, 1 or 2");
        CampaignSpec spec;
        spec.kind = CampaignKind::IvSweep;
        spec.v_start_volts = v_start;
        spec.v_stop_volts = v_stop;
        spec.v_step_volts = v_step;
        spec.polarity_mode = static_cast<PolarityMode>(polarity_mode);
        const CellAddress addr{sub_array, row, col};
        const auto records = hysteresis_loop
                                 ? chip->driver.run_hysteresis_loop(addr, spec)
                                 : chip->driver.run_iv_sweep(addr, spec);
        const rc_status s2 = export_records(records, out_records, out_count);
        if (s2 != rc_ok) throw IoError(g_last_error);
    });
}

rc_status rc_chip_mass_read(rc_chip* chip, int sub_array, int row_first,
                            int row_last, int col_first, int col_last,
                            double v_read_volts, int jobs,
                            rc_measurement** out_records, size_t* out_count) {
    if (rc_status s = require(chip && out_records && out_count, "null argument"))
        return s;
    *out_records = nullptr;
    *out_count = 0;
    return guarded([&] {
        CampaignSpec spec;
        spec.kind = CampaignKind::MassCharacterize;
        if (sub_array < 0) {
            for (int sub = 0; sub < kNumSubArrays; ++sub)
                spec.spans.push_back(
                    AddressSpan{sub, row_first, row_last, col_first, col_last});
        } else {
            spec.spans.push_back(
                AddressSpan{sub_array, row_first, row_last, col_first, col_last});
        }
        spec.v_read_volts = v_read_volts;
        spec.jobs = jobs;
        const auto records = chip->driver.mass_characterize(spec);
        const rc_status s2 = export_records(records, out_records, out_count);
        if (s2 != rc_ok) throw IoError(g_last_error);
    });
}

void rc_free_measurements(rc_measurement* records) { delete[] records; }

rc_status rc_chip_transcript_start(rc_chip* chip, const char* path) {
    if (rc_status s = require(chip && path, "null argument")) return s;
    return guarded([&] { chip->driver.start_transcript(path); });
}

rc_status rc_chip_transcript_stop(rc_chip* chip) {
    if (rc_status s = require(chip != nullptr, "chip handle is null")) return s;
    return guarded([&] { chip->driver.stop_transcript(); });
}

rc_status rc_chip_replay(rc_chip* chip, const char* path,
                         uint64_t* out_bitstream_hash) {
    if (rc_status s = require(chip && path, "null argument")) return s;
    return guarded([&] {
        const ReplayResult res = chip->driver.replay_transcript(path);
        if (out_bitstream_hash) *out_bitstream_hash = res.bitstream_hash;
        if (!res.integrity_ok)
            throw IntegrityError(res.warnings.empty() ? "transcript integrity check failed"
                                                      : res.warnings.front());
    });
}

rc_status rc_chip_replay_decode(rc_chip* chip, const char* transcript_path,
                                const char* csv_path, uint64_t* out_bitstream_hash) {
    if (rc_status s = require(chip && transcript_path && csv_path, "null argument"))
        return s;
    return guarded([&] {
        std::vector<MeasurementRecord> decoded;
        const ReplayResult res = chip->driver.replay_transcript(transcript_path,
                                                                &decoded);
        std::ofstream csv(csv_path);
        if (!csv) throw IoError(std::string("cannot open CSV for writing: ") + csv_path);
        csv << measurement_csv_header() << "\n";
        for (const auto& m : decoded) csv << measurement_csv_row(m) << "\n";
        if (!csv) throw IoError("CSV write failed");
        if (out_bitstream_hash) *out_bitstream_hash = res.bitstream_hash;
        if (!res.integrity_ok)
            throw IntegrityError(res.warnings.empty()
                                     ? "transcript integrity check failed"
                                     : res.warnings.front());
    });
}

rc_status rc_chip_trace_enable(rc_chip* chip, int on) {
    if (rc_status s = require(chip != nullptr, "chip handle is null")) return s;
    return guarded([&] { chip->driver.set_trace_enabled(on != 0); });
}

rc_status rc_chip_bitstream_hash(rc_chip* chip, uint64_t* out_hash) {
    if (rc_status s = require(chip && out_hash, "null argument")) return s;
    return guarded([&] { *out_hash = chip->driver.bitstream_hash(); });
}

rc_status rc_chip_save_trace(rc_chip* chip, int sub_array, const char* path,
                             int mode, int packet_index) {
    if (rc_status s = require(chip && path, "null argument")) return s;
    return guarded([&] {
        if (mode != kTraceModeSingle && mode != kTraceModeFrame)
            throw UsageError("trace mode must be 1 (single) or 2 (frame)");
        if (packet_index < 0 || packet_index >= kFrameEntries)
            throw UsageError("packet index out of range");
        chip->driver.save_trace(sub_array, path, static_cast<std::uint8_t>(mode),
                                static_cast<std::uint8_t>(packet_index));
    });
}

rc_status rc_decode_trace_file(const char* trace_path, const char* csv_path) {
    if (rc_status s = require(trace_path != nullptr, "trace path is null")) return s;
    return guarded([&] {
        const BitstreamTrace t = read_trace_file(trace_path);
        std::ostringstream os;
        os << "sub_array,chunk,slot,kind,adc_code,gain_sel,col_in_set,status,"
              "frame_counter,reg_checksum,word\n";

        auto emit_word = [&](std::size_t chunk, int slot, std::uint32_t word) {
            char line[160];
            if (slot == 32 && is_control_header(word)) {
                std::snprintf(line, sizeof line,
                              "%d,%zu,%d,header,,,,,%u,,0x%07X\n", t.sub_array, chunk,
                              slot, control_header_counter(word), word);
            } else if (slot == 33 && is_control_checksum(word)) {
                std::snprintf(line, sizeof line,
                              "%d,%zu,%d,checksum,,,,,,0x%04X,0x%07X\n", t.sub_array,
                              chunk, slot, control_checksum_value(word), word);
            } else {
                const DataPacket p = unpack_packet(word);
                std::snprintf(line, sizeof line,
                              "%d,%zu,%d,data,%u,%u,%u,%u,,,0x%07X\n", t.sub_array,
                              chunk, slot, p.adc_code, p.gain_sel, p.col_in_set,
                              p.status, word);
            }
            os << line;
        };

        const std::size_t chunk_len =
            t.mode == kTraceModeFrame
                ? static_cast<std::size_t>(1 + kFrameEntries * kPairsPerPacket)
                : static_cast<std::size_t>(1 + t.packet_index + kPairsPerPacket);
        if (chunk_len == 0 || t.symbols.size() % chunk_len != 0)
            throw ParseError("trace length is not a whole number of operations");

        const std::size_t chunks = t.symbols.size() / chunk_len;
        for (std::size_t ci = 0; ci < chunks; ++ci) {
            const std::span<const std::uint8_t> chunk(
                t.symbols.data() + ci * chunk_len, chunk_len);
            if (t.mode == kTraceModeFrame) {
                const DecodedFrame f = deserialize_frame(chunk);
                for (int slot = 0; slot < kFrameEntries; ++slot)
                    emit_word(ci, slot, f.frame.entries[slot]);
            } else {
                const std::uint32_t word = deserialize_single(chunk, t.packet_index);
                emit_word(ci, t.packet_index, word);
            }
        }

        if (csv_path) {
            std::ofstream f(csv_path);
            if (!f) throw IoError(std::string("cannot open CSV for writing: ") + csv_path);
            f << os.str();
            if (!f) throw IoError("CSV write failed");
        } else {
            std::fputs(os.str().c_str(), stdout);
        }
    });
}

const char* rc_measurement_csv_header(void) {
    static const std::string header = measurement_csv_header();
    return header.c_str();
}

namespace {

MeasurementRecord to_cpp(const rc_measurement& m) {
    MeasurementRecord out;
    out.address = CellAddress{m.sub_array, m.row, m.col};
    out.polarity = m.polarity ? Polarity::Reverse : Polarity::Forward;
    out.v_dut_volts = m.v_dut_volts;
    out.dac_code = m.dac_code;
    out.adc_code = m.adc_code;
    out.gain_sel = m.gain_sel;
    out.flags = m.flags;
    out.i_amps = m.i_amps;
    out.r_ohms = m.r_ohms;
    out.sim_time_s = m.sim_time_s;
    out.r_true_ohms = m.r_true_ohms;
    return out;
}

rc_status copy_text(const std::string& text, char* buf, size_t buf_len) {
    if (!buf || buf_len == 0) {
        g_last_error = "output buffer is null or empty";
        return rc_err_usage;
    }
    if (text.size() + 1 > buf_len) {
        g_last_error = "output buffer too small (" + std::to_string(text.size() + 1) +
                       " bytes needed)";
        return rc_err_usage;
    }
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return rc_ok;
}

}  // namespace

rc_status rc_measurement_csv(const rc_measurement* m, char* buf, size_t buf_len) {
    if (rc_status s = require(m != nullptr, "measurement is null")) return s;
    try {
        return copy_text(measurement_csv_row(to_cpp(*m)), buf, buf_len);
    } catch (const std::exception& e) {
        return set_error(e);
    }
}

rc_status rc_mass_summary(const rc_measurement* records, size_t count,
                          double wall_seconds, char* buf, size_t buf_len) {
    if (rc_status s = require(records || count == 0, "records is null")) return s;
    try {
        std::vector<MeasurementRecord> rec;
        rec.reserve(count);
        for (size_t i = 0; i < count; ++i) rec.push_back(to_cpp(records[i]));
        return copy_text(Driver::summarize(rec, wall_seconds).to_text(), buf, buf_len);
    } catch (const std::exception& e) {
        return set_error(e);
    }
}

rc_status rc_population_normalize(const char* in_path, const char* out_path,
                                  uint64_t seed_override, int use_override) {
    if (rc_status s = require(in_path && out_path, "null argument")) return s;
    return guarded([&] {
        PopulationSpec spec = PopulationSpec::from_json_file(in_path);
        if (use_override) spec.seed = seed_override;
        std::ofstream f(out_path);
        if (!f) throw IoError(std::string("cannot open file for writing: ") + out_path);
        f << spec.to_json_text();
        if (!f) throw IoError("population write failed");
    });
}

rc_status rc_chip_population_digest(rc_chip* chip, uint16_t* out_digest) {
    if (rc_status s = require(chip && out_digest, "null argument")) return s;
    return guarded([&] { *out_digest = chip->sim.population_digest(); });
}

}  // extern "C"
