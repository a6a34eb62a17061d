#include "rramchar/host.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "rramchar/errors.hpp"
#include "rramchar/hash.hpp"
#include "rramchar/serializer.hpp"

namespace rramchar {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

const char* flags_name(std::uint8_t flags) {
    switch (flags) {
        case 0: return "ok";
        case kFlagSatLow: return "sat_low";
        case kFlagSatHigh: return "sat_high";
        default: return "sat_low|sat_high";
    }
}

}  // namespace

std::string measurement_csv_header() {
    return "sub_array,row,col,polarity,v_dut_volts,dac_code,adc_code,gain_sel,"
           "i_amps,r_ohms,flags,sim_time_s,r_true_ohms";
}

std::string measurement_csv_row(const MeasurementRecord& r) {
    std::string out;
    out += std::to_string(r.address.sub_array);
    out += ',';
    out += std::to_string(r.address.row);
    out += ',';
    out += std::to_string(r.address.col);
    out += ',';
    out += r.polarity == Polarity::Forward ? 'F' : 'R';
    out += ',';
    out += fmt_double(r.v_dut_volts);
    out += ',';
    out += std::to_string(static_cast<int>(r.dac_code));
    out += ',';
    out += std::to_string(static_cast<int>(r.adc_code));
    out += ',';
    out += std::to_string(static_cast<int>(r.gain_sel));
    out += ',';
    out += fmt_double(r.i_amps);
    out += ',';
    out += fmt_double(r.r_ohms);
    out += ',';
    out += flags_name(r.flags);
    out += ',';
    out += fmt_double(r.sim_time_s);
    out += ',';
    out += fmt_double(r.r_true_ohms);
    return out;
}

void AddressSpan::validate() const {
    if (sub_array < 0 || sub_array >= kNumSubArrays)
        throw RangeError("span sub-array out of range");
    if (row_first < 0 || row_last >= kNumRows || row_first > row_last)
        throw RangeError("span row range invalid");
    if (col_first < 0 || col_last >= kNumCols || col_first > col_last)
        throw RangeError("span column range invalid");
}

std::size_t AddressSpan::cell_count() const {
    return static_cast<std::size_t>(row_last - row_first + 1) *
           static_cast<std::size_t>(col_last - col_first + 1);
}

void CampaignSpec::validate() const {
    for (const auto& s : spans) s.validate();
    if (jobs < 1 || jobs > 64) throw UsageError("jobs must be in 1..64");
    switch (kind) {
        case CampaignKind::IvSweep:
            if (!(v_step_volts > 0.0)) throw UsageError("sweep step must be positive");
            if (!(v_start_volts > 0.0))
                throw UsageError("sweep start voltage must be positive");
            if (v_stop_volts + 1e-12 < v_start_volts)
                throw UsageError("sweep grid must be monotone (start <= stop)");
            break;
        case CampaignKind::ReadResistance:
        case CampaignKind::MassCharacterize:
            if (!(v_read_volts > 0.0)) throw UsageError("read voltage must be positive");
            break;
        case CampaignKind::WritePulse:
            if (!(v_write_volts > 0.0))
                throw UsageError("write voltage must be positive");
            if (pulse_width_s < kTickSeconds - 1e-15)
                throw UsageError("pulse width below one tick");
            if (pulse_width_s > 65535.0 * kTickSeconds)
                throw UsageError("pulse width exceeds the 16-bit tick counter");
            break;
    }
}

std::uint8_t solve_drive_voltage(double r_estimate_ohms, double v_dut_target,
                                 const DriveChain& chain) {
    if (!(r_estimate_ohms > 0.0) || !std::isfinite(r_estimate_ohms))
        throw UsageError("resistance estimate must be positive");
    if (!(v_dut_target > 0.0) || !std::isfinite(v_dut_target))
        throw UsageError("target DUT voltage must be positive");

    const double r_fixed = r_estimate_ohms + chain.cell.r_access_on_ohms;
    auto stage_for = [&](double v_drive) {
        for (int k = 0; k < ResistorBank::kStages; ++k) {
            const double i = v_drive / (r_fixed + chain.bank.r_ohms[k]);
            if (chain.bank.amp_gain * i * chain.bank.r_ohms[k] >
                chain.v_threshold_volts)
                return k;
        }
        return ResistorBank::kStages - 1;
    };

    int k = -1;  // first round solves without the bank in the loop
    std::uint8_t code = 0;
    for (int round = 0; round < 6; ++round) {
        const double r_bank =
            (chain.include_bank && k >= 0) ? chain.bank.r_ohms[k] : 0.0;
        const double v_needed =
            v_dut_target * (r_fixed + r_bank) / r_estimate_ohms;
        if (v_needed > chain.dac.v_max_volts + 1e-12)
            throw RangeError("target DUT voltage unreachable: needs " +
                             fmt_double(v_needed) + " V of drive");
        const double raw = (v_needed - chain.dac.v_min_volts) / chain.dac.lsb_volts();
        const long c = std::lround(std::ceil(raw - 1e-9));
        code = static_cast<std::uint8_t>(
            std::clamp(c, 0L, static_cast<long>(chain.dac.max_code())));
        if (!chain.include_bank) return code;
        const int k2 = stage_for(dac_code_to_voltage(code, chain.dac));
        if (k2 == k) return code;
        k = k2;
    }
    return code;
}

std::string MassSummary::to_text() const {
    static const char* kBinNames[8] = {"<1k",    "1k-10k",  "10k-100k", "100k-1M",
                                       "1M-10M", "10M-100M", "100M-1G",  ">=1G"};
    std::ostringstream os;
    os << "cells read:        " << total << "\n";
    os << "flagged:           " << flagged << "\n";
    os << "defects (truth):   " << true_defects << "\n";
    os << "within 1% of true: " << fmt_double(100.0 * frac_within_1pct) << "%\n";
    os << "within 3% of true: " << fmt_double(100.0 * frac_within_3pct) << "%\n";
    os << "max rel error:     " << fmt_double(100.0 * max_rel_err) << "%\n";
    os << "resistance histogram (unflagged):\n";
    for (int i = 0; i < 8; ++i)
        os << "  " << kBinNames[i] << ": " << decade_hist[i] << "\n";
    os << "wall time:         " << fmt_double(wall_seconds) << " s\n";
    return os.str();
}

// ---------------------------------------------------------------------------

Driver::Driver(ChipSimulator& chip) : chip_(chip) {}

Driver::~Driver() = default;

void Driver::record_word(std::uint32_t word) {
    if (!transcript_) return;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%07X\n", word);
    *transcript_ << buf;
}

std::uint16_t Driver::spi(bool rw, std::uint8_t addr, std::uint16_t payload) {
    std::lock_guard<std::mutex> lock(spi_mutex_);
    const SpiTransaction t{rw, addr, payload};
    const std::uint16_t value = chip_.spi_access(t);
    record_word(t.to_word());
    return value;
}

std::uint16_t Driver::spi_cached(int sub, std::uint8_t offset, std::uint16_t value) {
    auto& slot = reg_cache_[sub][offset];
    if (slot && *slot == value) return value;
    const std::uint16_t stored = spi(true, reg::bank_base(sub) + offset, value);
    slot = stored;
    return stored;
}

void Driver::absorb_symbols(int sub, const std::vector<std::uint8_t>& symbols) {
    if (!trace_enabled_) return;
    trace_[sub].insert(trace_[sub].end(), symbols.begin(), symbols.end());
}

std::vector<std::uint8_t> Driver::go_and_wait(int sub) {
    spi(true, reg::bank_base(sub) + reg::kGo, 1);
    chip_.run_sub_until_idle(sub);
    auto symbols = chip_.drain_symbols(sub);
    absorb_symbols(sub, symbols);
    return symbols;
}

void Driver::start_transcript(const std::string& path) {
    if (transcript_) throw UsageError("a transcript is already being recorded");
    auto f = std::make_unique<std::ofstream>(path);
    if (!*f) throw IoError("cannot open transcript for writing: " + path);
    char head[80];
    std::snprintf(head, sizeof head, "# rramchar-transcript v1 pop=0x%04X cfg=0x%04X\n",
                  chip_.population_digest(), chip_.config().digest16());
    *f << head;
    transcript_ = std::move(f);
}

void Driver::stop_transcript() {
    if (!transcript_) return;
    transcript_->flush();
    if (!*transcript_) throw IoError("transcript write failed");
    transcript_.reset();
}

const std::vector<std::uint8_t>& Driver::trace_symbols(int sub) const {
    if (sub < 0 || sub >= kNumSubArrays) throw RangeError("sub-array out of range");
    return trace_[sub];
}

std::uint64_t Driver::bitstream_hash() const {
    Fnv64 h;
    for (int sub = 0; sub < kNumSubArrays; ++sub) {
        h.update_u8(static_cast<std::uint8_t>(sub));
        h.update_u64(trace_[sub].size());
        h.update(trace_[sub].data(), trace_[sub].size());
    }
    return h.h;
}

void Driver::save_trace(int sub, const std::string& path, std::uint8_t mode,
                        std::uint8_t packet_index) const {
    BitstreamTrace t;
    t.sub_array = static_cast<std::uint8_t>(sub);
    t.mode = mode;
    t.packet_index = packet_index;
    t.symbols = trace_symbols(sub);
    write_trace_file(path, t);
}

DriveChain Driver::read_chain(int sub) const {
    const ChipConfig& cfg = chip_.config();
    return DriveChain{cfg.cell, cfg.bank, cfg.dac, cfg.adc,
                      chip_.threshold_volts(sub), true};
}

DriveChain Driver::write_chain() const {
    const ChipConfig& cfg = chip_.config();
    return DriveChain{cfg.cell, cfg.bank, cfg.dac, cfg.adc,
                      cfg.bank.v_threshold_volts, false};
}

void Driver::program_common(const CellAddress& addr, std::uint8_t dac_code,
                            Polarity pol) {
    const int sub = addr.sub_array;
    spi_cached(sub, reg::kRowAddr, gray_encode(static_cast<std::uint16_t>(addr.row)));
    spi_cached(sub, reg::kColAddr,
               static_cast<std::uint16_t>((addr.set_index() << 4) | addr.col_in_set()));
    spi_cached(sub, reg::kDacCode, dac_code);
    spi_cached(sub, reg::kPolarity, pol == Polarity::Reverse ? 1 : 0);
}

MeasurementRecord Driver::reconstruct(const DataPacket& pkt, const CellAddress& addr,
                                      std::uint8_t dac_code, Polarity pol,
                                      double threshold_volts, double sim_time_s) {
    const ChipConfig& cfg = chip_.config();
    ReadoutResult rr;
    rr.adc_code = pkt.adc_code;
    rr.gain_sel = pkt.gain_sel;
    rr.saturated_low = pkt.status & kStatusSatLow;
    rr.saturated_high = pkt.status & kStatusSatHigh;

    ResistorBank bank = cfg.bank;
    bank.v_threshold_volts = threshold_volts;
    const int k = rr.stage();
    if (k < 0) throw IntegrityError("packet gain field is not one-hot");

    const double i_mag = reconstruct_current(rr, bank, cfg.adc);
    const double v_drive = dac_code_to_voltage(dac_code, cfg.dac);
    const double v_dut_mag =
        v_drive - i_mag * (cfg.cell.r_access_on_ohms + bank.r_ohms[k]);

    MeasurementRecord m;
    m.address = addr;
    m.polarity = pol;
    m.dac_code = dac_code;
    m.adc_code = pkt.adc_code;
    m.gain_sel = pkt.gain_sel;
    if (rr.saturated_low) m.flags |= kFlagSatLow;
    if (rr.saturated_high) m.flags |= kFlagSatHigh;
    const double sign = pol == Polarity::Forward ? 1.0 : -1.0;
    m.i_amps = sign * i_mag;
    m.v_dut_volts = sign * v_dut_mag;
    m.r_ohms = i_mag > 0.0 ? v_dut_mag / i_mag : cfg.cell.r_off_ohms;
    m.sim_time_s = sim_time_s;
    return m;
}

MeasurementRecord Driver::decode_single(int sub, const std::vector<std::uint8_t>& symbols,
                                        const CellAddress& addr, std::uint8_t dac_code,
                                        Polarity pol) {
    const int set = addr.set_index();
    const std::uint32_t word = deserialize_single(std::span(symbols), set);
    const DataPacket pkt = unpack_packet(word);
    if (!pkt.valid()) throw IntegrityError("data packet missing valid flag");
    if (pkt.col_in_set != addr.col_in_set())
        throw IntegrityError("data packet column does not match the request");
    return reconstruct(pkt, addr, dac_code, pol, chip_.threshold_volts(sub),
                       chip_.time_seconds(sub));
}

MeasurementRecord Driver::read_cell(const CellAddress& addr, double v_read,
                                    Polarity pol) {
    addr.validate();
    if (!(v_read > 0.0) || !std::isfinite(v_read))
        throw UsageError("read voltage must be positive");
    const int sub = addr.sub_array;
    const DriveChain chain = read_chain(sub);

    // Pass 1: drive for the geometric middle of the supported range, then
    // re-solve the divider from the estimate it returns.
    const std::uint8_t code1 = solve_drive_voltage(1e5, v_read, chain);
    program_common(addr, code1, pol);
    spi_cached(sub, reg::kOpMode, reg::kOpRead);
    MeasurementRecord pass1 = decode_single(sub, go_and_wait(sub), addr, code1, pol);

    double r_est = pass1.r_ohms;
    if (!std::isfinite(r_est) || r_est <= 0.0) r_est = 1e5;
    r_est = std::clamp(r_est, 1.0, 1e12);

    std::uint8_t code2;
    try {
        code2 = solve_drive_voltage(r_est, v_read, chain);
    } catch (const RangeError&) {
        code2 = static_cast<std::uint8_t>(chain.dac.max_code());  // best effort
    }
    spi_cached(sub, reg::kDacCode, code2);
    MeasurementRecord m = decode_single(sub, go_and_wait(sub), addr, code2, pol);
    m.r_true_ohms =
        chip_.sub_array(sub).cell(addr.row, addr.col).state.current_resistance_ohms;
    return m;
}

void Driver::write_cell(const CellAddress& addr, double v_dut_target, Polarity pol,
                        double width_s, double r_estimate_ohms) {
    addr.validate();
    if (!(width_s > 0.0) || !std::isfinite(width_s))
        throw UsageError("pulse width must be positive");
    const long ticks = std::lround(width_s / kTickSeconds);
    if (ticks < 1) throw UsageError("pulse width below one tick");
    if (ticks > 0xFFFF) throw RangeError("pulse width exceeds the 16-bit tick counter");

    const std::uint8_t code = solve_drive_voltage(r_estimate_ohms, v_dut_target,
                                                  write_chain());
    const int sub = addr.sub_array;
    program_common(addr, code, pol);
    spi_cached(sub, reg::kPulseWidth, static_cast<std::uint16_t>(ticks));
    spi_cached(sub, reg::kOpMode, reg::kOpWrite);
    go_and_wait(sub);
}

std::vector<MeasurementRecord> Driver::run_iv_sweep(const CellAddress& addr,
                                                    const CampaignSpec& spec) {
    addr.validate();
    if (!(spec.v_step_volts > 0.0)) throw UsageError("sweep step must be positive");
    if (!(spec.v_start_volts > 0.0))
        throw UsageError("sweep start voltage must be positive");
    if (spec.v_stop_volts + 1e-12 < spec.v_start_volts)
        throw UsageError("sweep grid must be monotone (start <= stop)");

    std::vector<MeasurementRecord> records;
    for (double v = spec.v_start_volts; v <= spec.v_stop_volts + 1e-12;
         v += spec.v_step_volts) {
        if (spec.polarity_mode != PolarityMode::Reverse)
            records.push_back(read_cell(addr, v, Polarity::Forward));
        if (spec.polarity_mode != PolarityMode::Forward)
            records.push_back(read_cell(addr, v, Polarity::Reverse));
    }
    return records;
}

std::vector<MeasurementRecord> Driver::run_hysteresis_loop(const CellAddress& addr,
                                                           const CampaignSpec& spec) {
    addr.validate();
    if (!(spec.v_step_volts > 0.0)) throw UsageError("sweep step must be positive");
    if (!(spec.v_start_volts > 0.0))
        throw UsageError("sweep start voltage must be positive");
    if (spec.v_stop_volts + 1e-12 < spec.v_start_volts)
        throw UsageError("sweep grid must be monotone (start <= stop)");

    std::vector<double> up;
    for (double v = spec.v_start_volts; v <= spec.v_stop_volts + 1e-12;
         v += spec.v_step_volts)
        up.push_back(v);

    // Four monotone segments give the full butterfly: 0 -> +V -> 0 -> -V -> 0.
    std::vector<MeasurementRecord> records;
    for (double v : up) records.push_back(read_cell(addr, v, Polarity::Forward));
    for (auto it = up.rbegin(); it != up.rend(); ++it)
        records.push_back(read_cell(addr, *it, Polarity::Forward));
    for (double v : up) records.push_back(read_cell(addr, v, Polarity::Reverse));
    for (auto it = up.rbegin(); it != up.rend(); ++it)
        records.push_back(read_cell(addr, *it, Polarity::Reverse));
    return records;
}

void Driver::mass_worker(int sub, const CampaignSpec& spec,
                         std::vector<std::vector<MeasurementRecord>>& span_outputs) {
    const DriveChain chain = read_chain(sub);
    const std::uint8_t code_mid = solve_drive_voltage(1e5, spec.v_read_volts, chain);
    const Polarity pol = Polarity::Forward;

    for (std::size_t si = 0; si < spec.spans.size(); ++si) {
        const AddressSpan& span = spec.spans[si];
        if (span.sub_array != sub) continue;
        auto& out = span_outputs[si];
        out.resize(span.cell_count());
        const int ncols = span.col_last - span.col_first + 1;

        for (int c = 0; c < kColsPerSet; ++c) {
            std::vector<int> sets;
            for (int set = 0; set < kNumSets; ++set) {
                const int col = set * kColsPerSet + c;
                if (col >= span.col_first && col <= span.col_last) sets.push_back(set);
            }
            if (sets.empty()) continue;

            // Point every set's mux at this column-in-set.
            const std::uint16_t colsel = static_cast<std::uint16_t>(
                c | (c << 4) | (c << 8) | (c << 12));
            for (int j = 0; j < 8; ++j)
                spi_cached(sub, static_cast<std::uint8_t>(reg::kColSel0 + j), colsel);

            for (int row = span.row_first; row <= span.row_last; ++row) {
                spi_cached(sub, reg::kRowAddr,
                           gray_encode(static_cast<std::uint16_t>(row)));
                spi_cached(sub, reg::kPolarity, 0);
                spi_cached(sub, reg::kOpMode, reg::kOpReadAll);

                // Pass 1: common mid-range drive on all sets.
                std::array<std::uint8_t, kNumSets> codes;
                codes.fill(code_mid);
                for (int j = 0; j < 16; ++j)
                    spi_cached(sub, static_cast<std::uint8_t>(reg::kDacSet0 + j),
                               static_cast<std::uint16_t>(codes[2 * j] |
                                                          (codes[2 * j + 1] << 8)));
                const auto syms1 = go_and_wait(sub);
                auto frame1 = deserialize_frame(syms1);

                // Pass 2: per-set drive solved from the first-pass estimate.
                const double threshold = chip_.threshold_volts(sub);
                for (int set : sets) {
                    const DataPacket pkt = unpack_packet(frame1.frame.entries[set]);
                    CellAddress a{sub, row, set * kColsPerSet + c};
                    MeasurementRecord est =
                        reconstruct(pkt, a, code_mid, pol, threshold, 0.0);
                    double r_est = est.r_ohms;
                    if (!std::isfinite(r_est) || r_est <= 0.0) r_est = 1e5;
                    r_est = std::clamp(r_est, 1.0, 1e12);
                    try {
                        codes[set] = solve_drive_voltage(r_est, spec.v_read_volts, chain);
                    } catch (const RangeError&) {
                        codes[set] = static_cast<std::uint8_t>(chain.dac.max_code());
                    }
                }
                for (int j = 0; j < 16; ++j)
                    spi_cached(sub, static_cast<std::uint8_t>(reg::kDacSet0 + j),
                               static_cast<std::uint16_t>(codes[2 * j] |
                                                          (codes[2 * j + 1] << 8)));
                const auto syms2 = go_and_wait(sub);
                auto frame2 = deserialize_frame(syms2);

                const double t_now = chip_.time_seconds(sub);
                for (int set : sets) {
                    const DataPacket pkt = unpack_packet(frame2.frame.entries[set]);
                    if (!pkt.valid())
                        throw IntegrityError("frame data packet missing valid flag");
                    const CellAddress a{sub, row, set * kColsPerSet + c};
                    MeasurementRecord m =
                        reconstruct(pkt, a, codes[set], pol, threshold, t_now);
                    if (spec.attach_ground_truth)
                        m.r_true_ohms = chip_.sub_array(sub)
                                            .cell(a.row, a.col)
                                            .state.current_resistance_ohms;
                    const std::size_t idx =
                        static_cast<std::size_t>(row - span.row_first) * ncols +
                        (a.col - span.col_first);
                    out[idx] = m;
                }
            }
        }
    }
}

std::vector<MeasurementRecord> Driver::mass_characterize(const CampaignSpec& spec) {
    spec.validate();
    std::vector<std::vector<MeasurementRecord>> span_outputs(spec.spans.size());

    std::vector<int> subs;
    for (const auto& s : spec.spans)
        if (std::find(subs.begin(), subs.end(), s.sub_array) == subs.end())
            subs.push_back(s.sub_array);

    if (spec.jobs > 1 && subs.size() > 1) {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(subs.size());
        for (std::size_t i = 0; i < subs.size(); ++i) {
            threads.emplace_back([&, i] {
                try {
                    mass_worker(subs[i], spec, span_outputs);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (int sub : subs) mass_worker(sub, spec, span_outputs);
    }

    std::vector<MeasurementRecord> merged;
    std::size_t total = 0;
    for (const auto& v : span_outputs) total += v.size();
    merged.reserve(total);
    for (auto& v : span_outputs)
        merged.insert(merged.end(), v.begin(), v.end());
    return merged;
}

MassSummary Driver::summarize(const std::vector<MeasurementRecord>& records,
                              double wall_seconds) {
    MassSummary s;
    s.total = records.size();
    s.wall_seconds = wall_seconds;
    std::size_t compared = 0, within1 = 0, within3 = 0;
    for (const auto& r : records) {
        if (r.flagged()) {
            ++s.flagged;
        } else {
            const double mag = std::abs(r.r_ohms);
            const int bin = std::clamp(
                static_cast<int>(std::floor(std::log10(std::max(mag, 1.0)))) - 2, 0, 7);
            ++s.decade_hist[bin];
        }
        if (r.r_true_ohms > 0.0) {
            // Outside the supported decades only defects live.
            if (r.r_true_ohms < 0.999e3 || r.r_true_ohms > 1.001e7) ++s.true_defects;
            if (!r.flagged()) {
                const double rel =
                    std::abs(r.r_ohms - r.r_true_ohms) / r.r_true_ohms;
                s.max_rel_err = std::max(s.max_rel_err, rel);
                ++compared;
                if (rel <= 0.01) ++within1;
                if (rel <= 0.03) ++within3;
            }
        }
    }
    if (compared) {
        s.frac_within_1pct = static_cast<double>(within1) / compared;
        s.frac_within_3pct = static_cast<double>(within3) / compared;
    }
    return s;
}

ReplayResult Driver::replay_transcript(const std::string& path,
                                       std::vector<MeasurementRecord>* decoded) {
    if (transcript_) throw UsageError("cannot replay while recording a transcript");
    std::ifstream f(path);
    if (!f) throw IoError("cannot open transcript: " + path);

    ReplayResult res;
    const bool was_tracing = trace_enabled_;
    trace_enabled_ = true;
    // The replayed words bypass the write cache, so it no longer reflects
    // the register file afterwards.
    for (auto& bank : reg_cache_) bank.fill(std::nullopt);

    // Shadow register file, so measurements can be rebuilt from the
    // transcript plus the bitstream alone.
    std::array<std::array<std::uint16_t, reg::kBankRegCount>, kNumSubArrays> shadow{};
    for (auto& bank : shadow) {
        bank[reg::kPulseWidth] = 1;
        bank[reg::kThreshold] = reg::kThresholdReset;
    }

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        std::size_t start = 0;
        while (start < line.size() &&
               std::isspace(static_cast<unsigned char>(line[start])))
            ++start;
        if (start) line.erase(0, start);
        if (line.empty()) continue;

        if (line[0] == '#') {
            if (line.rfind("# rramchar-transcript", 0) == 0) {
                unsigned pop = 0, cfg = 0;
                int version = 0;
                if (std::sscanf(line.c_str(), "# rramchar-transcript v%d pop=%x cfg=%x",
                                &version, &pop, &cfg) != 3 ||
                    version != 1)
                    throw ParseError("unsupported transcript header at line " +
                                     std::to_string(lineno));
                if (static_cast<std::uint16_t>(pop) != chip_.population_digest()) {
                    res.integrity_ok = false;
                    res.warnings.push_back(
                        "population digest mismatch: transcript was recorded "
                        "against a different seed/population");
                }
                if (static_cast<std::uint16_t>(cfg) != chip_.config().digest16()) {
                    res.integrity_ok = false;
                    res.warnings.push_back(
                        "config digest mismatch: transcript was recorded "
                        "against a different chip configuration");
                }
            }
            continue;
        }

        std::uint32_t word = 0;
        if (line.size() != 7 ||
            std::sscanf(line.c_str(), "%7x", &word) != 1 ||
            line.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
            throw ParseError("bad transcript word at line " + std::to_string(lineno));

        SpiTransaction t = SpiTransaction::from_word(word);
        {
            std::lock_guard<std::mutex> lock(spi_mutex_);
            chip_.spi_access(t);
        }
        ++res.transactions;
        if (!t.rw || t.reg_addr < 0x10) continue;

        const int sub = (t.reg_addr - 0x10) / reg::kBankStride;
        const std::uint8_t offset =
            static_cast<std::uint8_t>((t.reg_addr - 0x10) % reg::kBankStride);
        if (offset != reg::kGo) {
            shadow[sub][offset] = t.payload;
            continue;
        }
        if (!(t.payload & 1)) continue;

        chip_.run_sub_until_idle(sub);
        const auto symbols = chip_.drain_symbols(sub);
        absorb_symbols(sub, symbols);
        ++res.operations;

        if (!decoded) continue;
        const auto& bank = shadow[sub];
        const double threshold =
            adc_code_to_voltage(bank[reg::kThreshold], chip_.config().adc);
        const Polarity pol =
            bank[reg::kPolarity] ? Polarity::Reverse : Polarity::Forward;
        const int row = gray_decode(bank[reg::kRowAddr] & 0x1FF);
        if (bank[reg::kOpMode] == reg::kOpRead) {
            const int set = (bank[reg::kColAddr] >> 4) & 0x1F;
            const int col = set * kColsPerSet + (bank[reg::kColAddr] & 0xF);
            const CellAddress addr{sub, row, col};
            const DataPacket pkt =
                unpack_packet(deserialize_single(std::span(symbols), set));
            decoded->push_back(reconstruct(
                pkt, addr, static_cast<std::uint8_t>(bank[reg::kDacCode]), pol,
                threshold, chip_.time_seconds(sub)));
        } else if (bank[reg::kOpMode] == reg::kOpReadAll) {
            const auto frame = deserialize_frame(std::span(symbols));
            for (int set = 0; set < kNumSets; ++set) {
                const std::uint16_t colsel_word = bank[reg::kColSel0 + set / 4];
                const int c = (colsel_word >> (4 * (set % 4))) & 0xF;
                const std::uint16_t dac_word = bank[reg::kDacSet0 + set / 2];
                const std::uint8_t code =
                    static_cast<std::uint8_t>((dac_word >> (8 * (set % 2))) & 0xFF);
                const CellAddress addr{sub, row, set * kColsPerSet + c};
                const DataPacket pkt = unpack_packet(frame.frame.entries[set]);
                decoded->push_back(reconstruct(pkt, addr, code, pol, threshold,
                                               chip_.time_seconds(sub)));
            }
        }
    }

    res.bitstream_hash = bitstream_hash();
    trace_enabled_ = was_tracing;
    return res;
}

}  // namespace rramchar
