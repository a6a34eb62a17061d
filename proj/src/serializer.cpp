#include "rramchar/serializer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "rramchar/errors.hpp"

namespace rramchar {

namespace {

constexpr std::uint32_t kWordMask = (1u << kPacketBits) - 1;

void check_field(std::uint32_t value, std::uint32_t max, const char* name) {
    if (value > max)
        throw RangeError(std::string("packet field over width: ") + name);
}

/// Appends the 13 two-bit symbols of one word, MSB pair first.
void shift_out(std::vector<std::uint8_t>& out, std::uint32_t word) {
    for (int pair = kPairsPerPacket - 1; pair >= 0; --pair)
        out.push_back(static_cast<std::uint8_t>((word >> (2 * pair)) & 0x3));
}

std::uint32_t shift_in(std::span<const std::uint8_t> symbols) {
    std::uint32_t word = 0;
    for (int pair = 0; pair < kPairsPerPacket; ++pair) {
        const std::uint8_t s = symbols[pair];
        if (s > 3) throw ParseError("bitstream symbol out of range");
        word = (word << 2) | s;
    }
    return word;
}

}  // namespace

std::uint32_t pack_packet(const DataPacket& p) {
    check_field(p.adc_code, 0xFFF, "adc_code");
    check_field(p.gain_sel, 0x1F, "gain_sel");
    check_field(p.col_in_set, 0xF, "col_in_set");
    check_field(p.status, 0x1F, "status");
    return (static_cast<std::uint32_t>(p.adc_code) << 14) |
           (static_cast<std::uint32_t>(p.gain_sel) << 9) |
           (static_cast<std::uint32_t>(p.col_in_set) << 5) |
           static_cast<std::uint32_t>(p.status);
}

DataPacket unpack_packet(std::uint32_t word) {
    if (word > kWordMask) throw ParseError("packet word wider than 26 bits");
    DataPacket p;
    p.adc_code = static_cast<std::uint16_t>((word >> 14) & 0xFFF);
    p.gain_sel = static_cast<std::uint8_t>((word >> 9) & 0x1F);
    p.col_in_set = static_cast<std::uint8_t>((word >> 5) & 0xF);
    p.status = static_cast<std::uint8_t>(word & 0x1F);
    return p;
}

// Header: [25:10] frame counter, [9:8] op mode, [7] busy, [6] done,
// [5:0] magic. Checksum: [25:10] checksum, [9:0] magic.
std::uint32_t make_control_header(std::uint16_t frame_counter, int op_mode,
                                  bool busy, bool done) {
    check_field(static_cast<std::uint32_t>(op_mode), 0x3, "op_mode");
    return (static_cast<std::uint32_t>(frame_counter) << 10) |
           (static_cast<std::uint32_t>(op_mode) << 8) |
           (static_cast<std::uint32_t>(busy) << 7) |
           (static_cast<std::uint32_t>(done) << 6) | kCtrlHeaderMagic;
}

std::uint32_t make_control_checksum(std::uint16_t reg_checksum) {
    return (static_cast<std::uint32_t>(reg_checksum) << 10) | kCtrlChecksumMagic;
}

bool is_control_header(std::uint32_t word) {
    return (word & 0x3F) == kCtrlHeaderMagic;
}

bool is_control_checksum(std::uint32_t word) {
    return (word & 0x3FF) == kCtrlChecksumMagic;
}

std::uint16_t control_header_counter(std::uint32_t word) {
    return static_cast<std::uint16_t>((word >> 10) & 0xFFFF);
}

std::uint16_t control_checksum_value(std::uint32_t word) {
    return static_cast<std::uint16_t>((word >> 10) & 0xFFFF);
}

SymbolStream retrieve_packet(const Frame& frame, int n) {
    if (n < 0 || n >= kFrameEntries)
        throw RangeError("packet index out of range: " + std::to_string(n));
    SymbolStream s;
    s.symbols.reserve(static_cast<std::size_t>(1 + n + kPairsPerPacket));
    // Load cycle, then one browse cycle per skipped entry; lane idles at 0.
    for (int i = 0; i < 1 + n; ++i) s.symbols.push_back(0);
    shift_out(s.symbols, frame.entries[n] & kWordMask);
    return s;
}

SymbolStream stream_frame(const Frame& frame) {
    SymbolStream s;
    s.symbols.reserve(1 + kFrameEntries * kPairsPerPacket);
    s.symbols.push_back(0);  // load cycle
    for (int n = 0; n < kFrameEntries; ++n) shift_out(s.symbols, frame.entries[n] & kWordMask);
    return s;
}

std::uint32_t deserialize_single(std::span<const std::uint8_t> symbols, int n) {
    if (n < 0 || n >= kFrameEntries)
        throw RangeError("packet index out of range: " + std::to_string(n));
    const std::size_t expect = static_cast<std::size_t>(1 + n + kPairsPerPacket);
    if (symbols.size() != expect)
        throw ParseError("single-packet stream length " +
                         std::to_string(symbols.size()) + ", expected " +
                         std::to_string(expect));
    for (int i = 0; i < 1 + n; ++i)
        if (symbols[i] != 0) throw ParseError("lane not idle during browse cycles");
    return shift_in(symbols.subspan(static_cast<std::size_t>(1 + n)));
}

DecodedFrame deserialize_frame(std::span<const std::uint8_t> symbols) {
    const std::size_t expect = 1 + kFrameEntries * kPairsPerPacket;
    if (symbols.size() != expect)
        throw ParseError("frame stream length " + std::to_string(symbols.size()) +
                         ", expected " + std::to_string(expect));
    if (symbols[0] != 0) throw ParseError("lane not idle during frame load");
    DecodedFrame d;
    for (int n = 0; n < kFrameEntries; ++n)
        d.frame.entries[n] =
            shift_in(symbols.subspan(1 + static_cast<std::size_t>(n) * kPairsPerPacket));
    const std::uint32_t header = d.frame.entries[32];
    const std::uint32_t checksum = d.frame.entries[33];
    if (!is_control_header(header))
        throw IntegrityError("frame header magic mismatch");
    if (!is_control_checksum(checksum))
        throw IntegrityError("frame checksum magic mismatch");
    d.frame_counter = control_header_counter(header);
    d.reg_checksum = control_checksum_value(checksum);
    return d;
}

void verify_frame_checksum(const DecodedFrame& decoded, std::uint16_t expected) {
    if (decoded.reg_checksum != expected) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "register checksum mismatch: frame 0x%04X, expected 0x%04X",
                      decoded.reg_checksum, expected);
        throw IntegrityError(buf);
    }
}

std::vector<std::uint8_t> pack_symbols(std::span<const std::uint8_t> symbols) {
    std::vector<std::uint8_t> bytes((symbols.size() + 3) / 4, 0);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (symbols[i] > 3) throw UsageError("symbol out of range");
        bytes[i / 4] |= static_cast<std::uint8_t>(symbols[i] << (2 * (i % 4)));
    }
    return bytes;
}

std::vector<std::uint8_t> unpack_symbols(std::span<const std::uint8_t> bytes,
                                         std::uint64_t count) {
    if (bytes.size() < (count + 3) / 4)
        throw ParseError("packed symbol buffer shorter than declared count");
    std::vector<std::uint8_t> symbols(count);
    for (std::uint64_t i = 0; i < count; ++i)
        symbols[i] = (bytes[i / 4] >> (2 * (i % 4))) & 0x3;
    return symbols;
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void write_trace_file(const std::string& path, const BitstreamTrace& trace) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kTraceMagic, kTraceMagic + 4);
    out.push_back(kTraceVersion);
    out.push_back(trace.sub_array);
    out.push_back(trace.mode);
    out.push_back(trace.packet_index);
    put_u64(out, trace.cycle0);
    put_u64(out, trace.symbols.size());
    const auto packed = pack_symbols(trace.symbols);
    out.insert(out.end(), packed.begin(), packed.end());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace file for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to trace file: " + path);
}

BitstreamTrace read_trace_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 24) throw ParseError("trace file truncated: " + path);
    if (!std::equal(kTraceMagic, kTraceMagic + 4, bytes.begin()))
        throw ParseError("not a bitstream trace file: " + path);
    if (bytes[4] != kTraceVersion)
        throw ParseError("unsupported trace file version " + std::to_string(bytes[4]));

    BitstreamTrace t;
    t.sub_array = bytes[5];
    t.mode = bytes[6];
    t.packet_index = bytes[7];
    t.cycle0 = get_u64(bytes.data() + 8);
    const std::uint64_t count = get_u64(bytes.data() + 16);
    t.symbols = unpack_symbols(std::span(bytes).subspan(24), count);
    return t;
}

}  // namespace rramchar
