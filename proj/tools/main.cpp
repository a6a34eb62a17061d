// Command-line front end. Talks to the simulator exclusively through the
// C API in rramchar/capi.h.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rramchar/capi.h"

namespace {

struct CliFailure : std::runtime_error {
    int exit_code;
    CliFailure(int code, const std::string& msg)
        : std::runtime_error(msg), exit_code(code) {}
};

int status_exit_code(rc_status s) {
    switch (s) {
        case rc_ok: return 0;
        case rc_err_usage: return 1;
        case rc_err_range: return 2;
        case rc_err_io: return 3;
        case rc_err_integrity: return 4;
        case rc_err_busy: return 2;
        case rc_err_parse: return 1;
    }
    return 1;
}

void check(rc_status s) {
    if (s != rc_ok) throw CliFailure(status_exit_code(s), rc_last_error());
}

struct ChipHandle {
    rc_chip* chip = nullptr;
    ~ChipHandle() { rc_chip_destroy(chip); }
};

struct Records {
    rc_measurement* data = nullptr;
    size_t count = 0;
    ~Records() { rc_free_measurements(data); }
};

// Options shared by the subcommands that stand up a chip.
struct CommonOpts {
    std::string config_path;
    std::string population_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string transcript_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "Chip configuration JSON file");
    cmd->add_option("--population", o.population_path, "Device population JSON file");
    cmd->add_option("--seed", o.seed, "Override the population seed")
        ->each([&](const std::string&) { o.seed_given = true; });
    cmd->add_option("--transcript", o.transcript_path,
                    "Record every register transaction to this file");
}

void make_chip(const CommonOpts& o, ChipHandle& h) {
    if (o.config_path.empty())
        check(rc_chip_create(nullptr, &h.chip));
    else
        check(rc_chip_create_from_config_file(o.config_path.c_str(), &h.chip));
    if (!o.population_path.empty()) {
        uint16_t digest = 0;
        check(rc_chip_populate_file(h.chip, o.population_path.c_str(), o.seed,
                                    o.seed_given ? 1 : 0, &digest));
        std::printf("population digest 0x%04X\n", digest);
    }
    if (!o.transcript_path.empty())
        check(rc_chip_transcript_start(h.chip, o.transcript_path.c_str()));
}

void finish_chip(const CommonOpts& o, ChipHandle& h) {
    if (!o.transcript_path.empty()) check(rc_chip_transcript_stop(h.chip));
}

void parse_range(const std::string& text, int& first, int& last, const char* what) {
    if (std::sscanf(text.c_str(), "%d:%d", &first, &last) == 2) return;
    if (std::sscanf(text.c_str(), "%d", &first) == 1) {
        last = first;
        return;
    }
    throw CliFailure(1, std::string("bad ") + what + " range: " + text +
                            " (expected FIRST:LAST or a single index)");
}

void print_record_csv(std::FILE* out, const rc_measurement& m) {
    char buf[256];
    check(rc_measurement_csv(&m, buf, sizeof buf));
    std::fprintf(out, "%s\n", buf);
}

void write_records_csv(const std::string& path, const rc_measurement* data,
                       size_t count) {
    std::FILE* f = path.empty() ? stdout : std::fopen(path.c_str(), "w");
    if (!f) throw CliFailure(3, "cannot open output file: " + path);
    std::fprintf(f, "%s\n", rc_measurement_csv_header());
    for (size_t i = 0; i < count; ++i) print_record_csv(f, data[i]);
    if (f != stdout) {
        if (std::fclose(f) != 0) throw CliFailure(3, "CSV write failed: " + path);
    }
}

int polarity_code(const std::string& name) {
    if (name == "forward") return 0;
    if (name == "reverse") return 1;
    if (name == "both") return 2;
    throw CliFailure(1, "polarity must be forward, reverse or both");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavioral simulator and host driver for a 1M-device "
                 "resistive-memory characterization chip"};
    app.require_subcommand(1);

    // --- populate ----------------------------------------------------------
    CommonOpts pop_opts;
    std::string pop_out;
    auto* cmd_pop = app.add_subcommand(
        "populate", "Materialize a device population and print its digest");
    add_common(cmd_pop, pop_opts);
    cmd_pop->add_option("--out", pop_out, "Write the normalized population JSON here");

    // --- write --------------------------------------------------------------
    CommonOpts wr_opts;
    int wr_sub = 0, wr_row = 0, wr_col = 0;
    double wr_voltage = 0.0, wr_width_ns = 100.0, wr_verify_v = 0.0;
    bool wr_reverse = false;
    auto* cmd_write = app.add_subcommand("write", "Apply one write pulse to a cell");
    add_common(cmd_write, wr_opts);
    cmd_write->add_option("--sub-array", wr_sub, "Sub-array index (0-3)")->required();
    cmd_write->add_option("--row", wr_row, "Row (0-511)")->required();
    cmd_write->add_option("--col", wr_col, "Column (0-511)")->required();
    cmd_write->add_option("--voltage", wr_voltage, "Target voltage across the device")
        ->required();
    cmd_write->add_flag("--reverse", wr_reverse, "Drive with reverse polarity");
    cmd_write->add_option("--width-ns", wr_width_ns, "Pulse width in ns (default 100)");
    cmd_write->add_option("--verify", wr_verify_v,
                          "Read back at this voltage after the pulse");

    // --- read ---------------------------------------------------------------
    CommonOpts rd_opts;
    int rd_sub = 0, rd_row = 0, rd_col = 0;
    double rd_voltage = 0.5;
    bool rd_reverse = false;
    std::string rd_out, rd_trace;
    auto* cmd_read = app.add_subcommand("read", "Measure one cell's resistance");
    add_common(cmd_read, rd_opts);
    cmd_read->add_option("--sub-array", rd_sub, "Sub-array index (0-3)")->required();
    cmd_read->add_option("--row", rd_row, "Row (0-511)")->required();
    cmd_read->add_option("--col", rd_col, "Column (0-511)")->required();
    cmd_read->add_option("--v-read", rd_voltage, "Target read voltage (default 0.5)");
    cmd_read->add_flag("--reverse", rd_reverse, "Read with reverse polarity");
    cmd_read->add_option("--out", rd_out, "Write the measurement CSV here");
    cmd_read->add_option("--trace", rd_trace, "Save the raw serial bitstream here");

    // --- sweep ---------------------------------------------------------------
    CommonOpts sw_opts;
    int sw_sub = 0, sw_row = 0, sw_col = 0;
    double sw_start = 0.05, sw_stop = 1.5, sw_step = 0.05;
    std::string sw_pol = "forward", sw_out, sw_trace;
    bool sw_loop = false;
    auto* cmd_sweep = app.add_subcommand("sweep", "Run an IV sweep on one cell");
    add_common(cmd_sweep, sw_opts);
    cmd_sweep->add_option("--sub-array", sw_sub, "Sub-array index (0-3)")->required();
    cmd_sweep->add_option("--row", sw_row, "Row (0-511)")->required();
    cmd_sweep->add_option("--col", sw_col, "Column (0-511)")->required();
    cmd_sweep->add_option("--v-start", sw_start, "Sweep start voltage (default 0.05)");
    cmd_sweep->add_option("--v-stop", sw_stop, "Sweep stop voltage (default 1.5)");
    cmd_sweep->add_option("--v-step", sw_step, "Sweep step (default 0.05)");
    cmd_sweep->add_option("--polarity", sw_pol, "forward | reverse | both");
    cmd_sweep->add_flag("--loop", sw_loop,
                        "Full hysteresis loop (up, down, reverse up, reverse down)");
    cmd_sweep->add_option("--out", sw_out, "Write the sweep CSV here (default stdout)");
    cmd_sweep->add_option("--trace", sw_trace, "Save the raw serial bitstream here");

    // --- campaign -------------------------------------------------------------
    CommonOpts cp_opts;
    std::vector<int> cp_subs;
    std::string cp_rows = "0:511", cp_cols = "0:511", cp_out, cp_trace_dir;
    double cp_vread = 0.5;
    int cp_jobs = 1;
    auto* cmd_campaign = app.add_subcommand(
        "campaign", "Mass resistance readout over address ranges");
    add_common(cmd_campaign, cp_opts);
    cmd_campaign->add_option("--sub-array", cp_subs,
                             "Sub-array index; repeatable (default: all four)");
    cmd_campaign->add_option("--rows", cp_rows, "Row range FIRST:LAST (default 0:511)");
    cmd_campaign->add_option("--cols", cp_cols,
                             "Column range FIRST:LAST (default 0:511)");
    cmd_campaign->add_option("--v-read", cp_vread, "Target read voltage (default 0.5)");
    cmd_campaign->add_option("--jobs", cp_jobs,
                             "Worker threads, sharded by sub-array (default 1)");
    cmd_campaign->add_option("--out", cp_out, "Write the measurement CSV here");
    cmd_campaign->add_option("--trace-dir", cp_trace_dir,
                             "Save per-sub-array bitstream traces to this directory");

    // --- replay ----------------------------------------------------------------
    CommonOpts rp_opts;
    std::string rp_transcript, rp_out;
    auto* cmd_replay = app.add_subcommand(
        "replay", "Re-run a recorded transcript and print the bitstream hash");
    add_common(cmd_replay, rp_opts);
    cmd_replay->add_option("--file", rp_transcript, "Transcript to replay")->required();
    cmd_replay->add_option("--out", rp_out, "Write decoded measurements CSV here");

    // --- decode -----------------------------------------------------------------
    std::string dc_trace, dc_out;
    auto* cmd_decode = app.add_subcommand(
        "decode", "Decode a saved bitstream trace into a packet CSV");
    cmd_decode->add_option("--trace", dc_trace, "Bitstream trace file")->required();
    cmd_decode->add_option("--out", dc_out, "Packet CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_pop->parsed()) {
            if (pop_opts.population_path.empty())
                throw CliFailure(1, "populate requires --population");
            ChipHandle h;
            make_chip(pop_opts, h);
            if (!pop_out.empty())
                check(rc_population_normalize(pop_opts.population_path.c_str(),
                                              pop_out.c_str(), pop_opts.seed,
                                              pop_opts.seed_given ? 1 : 0));
            finish_chip(pop_opts, h);
        } else if (cmd_write->parsed()) {
            ChipHandle h;
            make_chip(wr_opts, h);
            check(rc_chip_write_cell(h.chip, wr_sub, wr_row, wr_col, wr_voltage,
                                     wr_reverse ? 1 : 0, wr_width_ns * 1e-9));
            std::printf("pulse applied: sub %d row %d col %d, %.6g V %s, %.6g ns\n",
                        wr_sub, wr_row, wr_col, wr_voltage,
                        wr_reverse ? "reverse" : "forward", wr_width_ns);
            if (wr_verify_v > 0.0) {
                rc_measurement m{};
                check(rc_chip_read_cell(h.chip, wr_sub, wr_row, wr_col, wr_verify_v, 0,
                                        &m));
                std::printf("%s\n", rc_measurement_csv_header());
                print_record_csv(stdout, m);
            }
            finish_chip(wr_opts, h);
        } else if (cmd_read->parsed()) {
            ChipHandle h;
            make_chip(rd_opts, h);
            if (!rd_trace.empty()) check(rc_chip_trace_enable(h.chip, 1));
            rc_measurement m{};
            check(rc_chip_read_cell(h.chip, rd_sub, rd_row, rd_col, rd_voltage,
                                    rd_reverse ? 1 : 0, &m));
            std::printf("%s\n", rc_measurement_csv_header());
            print_record_csv(stdout, m);
            if (!rd_out.empty()) write_records_csv(rd_out, &m, 1);
            if (!rd_trace.empty())
                check(rc_chip_save_trace(h.chip, rd_sub, rd_trace.c_str(), 1,
                                         rd_col / 16));
            finish_chip(rd_opts, h);
        } else if (cmd_sweep->parsed()) {
            ChipHandle h;
            make_chip(sw_opts, h);
            if (!sw_trace.empty()) check(rc_chip_trace_enable(h.chip, 1));
            Records rec;
            check(rc_chip_iv_sweep(h.chip, sw_sub, sw_row, sw_col, sw_start, sw_stop,
                                   sw_step, polarity_code(sw_pol), sw_loop ? 1 : 0,
                                   &rec.data, &rec.count));
            write_records_csv(sw_out, rec.data, rec.count);
            if (!sw_trace.empty())
                check(rc_chip_save_trace(h.chip, sw_sub, sw_trace.c_str(), 1,
                                         sw_col / 16));
            if (!sw_out.empty())
                std::printf("%zu points written to %s\n", rec.count, sw_out.c_str());
            finish_chip(sw_opts, h);
        } else if (cmd_campaign->parsed()) {
            int row_first = 0, row_last = 511, col_first = 0, col_last = 511;
            parse_range(cp_rows, row_first, row_last, "row");
            parse_range(cp_cols, col_first, col_last, "column");
            ChipHandle h;
            make_chip(cp_opts, h);
            if (!cp_trace_dir.empty()) check(rc_chip_trace_enable(h.chip, 1));

            const auto t0 = std::chrono::steady_clock::now();
            std::vector<rc_measurement> all;
            if (cp_subs.size() <= 1) {
                Records part;
                check(rc_chip_mass_read(h.chip, cp_subs.empty() ? -1 : cp_subs.front(),
                                        row_first, row_last, col_first, col_last,
                                        cp_vread, cp_jobs, &part.data, &part.count));
                all.assign(part.data, part.data + part.count);
            } else {
                // A specific list of sub-arrays: one call each, concatenated
                // in the listed order.
                for (int sub : cp_subs) {
                    Records part;
                    check(rc_chip_mass_read(h.chip, sub, row_first, row_last, col_first,
                                            col_last, cp_vread, cp_jobs, &part.data,
                                            &part.count));
                    all.insert(all.end(), part.data, part.data + part.count);
                }
            }
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();

            if (!cp_out.empty()) write_records_csv(cp_out, all.data(), all.size());
            char summary[1024];
            check(rc_mass_summary(all.data(), all.size(), wall, summary,
                                  sizeof summary));
            std::fputs(summary, stdout);
            if (!cp_trace_dir.empty()) {
                std::filesystem::create_directories(cp_trace_dir);
                std::vector<int> subs = cp_subs;
                if (subs.empty()) subs = {0, 1, 2, 3};
                for (int sub : subs) {
                    const std::string path =
                        cp_trace_dir + "/sub" + std::to_string(sub) + ".rbst";
                    check(rc_chip_save_trace(h.chip, sub, path.c_str(), 2, 0));
                }
            }
            finish_chip(cp_opts, h);
        } else if (cmd_replay->parsed()) {
            if (!rp_opts.transcript_path.empty())
                throw CliFailure(1, "replay does not record a transcript");
            ChipHandle h;
            make_chip(rp_opts, h);
            uint64_t hash = 0;
            rc_status s;
            if (rp_out.empty())
                s = rc_chip_replay(h.chip, rp_transcript.c_str(), &hash);
            else
                s = rc_chip_replay_decode(h.chip, rp_transcript.c_str(), rp_out.c_str(),
                                          &hash);
            // The hash is valid even when the integrity check tripped.
            std::printf("bitstream hash 0x%016llX\n",
                        static_cast<unsigned long long>(hash));
            if (s != rc_ok) {
                std::fprintf(stderr, "warning: %s\n", rc_last_error());
                return status_exit_code(s);
            }
        } else if (cmd_decode->parsed()) {
            check(rc_decode_trace_file(dc_trace.c_str(),
                                       dc_out.empty() ? nullptr : dc_out.c_str()));
        }
    } catch (const CliFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code;
    }
    return 0;
}
