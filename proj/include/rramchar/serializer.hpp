#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rramchar {

// 26-bit packet layout (MSB..LSB):
//   [25:14] adc_code   12 bits
//   [13:9]  gain_sel    5 bits, one-hot when valid
//   [8:5]   col_in_set  4 bits
//   [4:0]   status      bit 4 valid, bit 3 saturated_high,
//                       bit 2 saturated_low, bits 1:0 sequence
inline constexpr int kPacketBits = 26;
inline constexpr int kFrameEntries = 34;   // 32 data + 2 control
inline constexpr int kPairsPerPacket = kPacketBits / 2;  // 13 lane cycles

inline constexpr std::uint8_t kStatusValid = 0x10;
inline constexpr std::uint8_t kStatusSatHigh = 0x08;
inline constexpr std::uint8_t kStatusSatLow = 0x04;
inline constexpr std::uint8_t kStatusSeqMask = 0x03;

struct DataPacket {
    std::uint16_t adc_code = 0;   // 12 bits
    std::uint8_t gain_sel = 0;    // 5 bits
    std::uint8_t col_in_set = 0;  // 4 bits
    std::uint8_t status = 0;      // 5 bits

    bool valid() const { return status & kStatusValid; }
};

std::uint32_t pack_packet(const DataPacket& p);   // throws on over-width fields
DataPacket unpack_packet(std::uint32_t word);

// Control packets occupy fixed frame slots. Slot 32 is the frame header
// (frame counter + controller state), slot 33 carries the register-file
// checksum. Both end in a fixed magic so the host can sanity-check framing.
inline constexpr std::uint32_t kCtrlHeaderMagic = 0x2A;    // low 6 bits
inline constexpr std::uint32_t kCtrlChecksumMagic = 0x155; // low 10 bits

std::uint32_t make_control_header(std::uint16_t frame_counter, int op_mode,
                                  bool busy, bool done);
std::uint32_t make_control_checksum(std::uint16_t reg_checksum);

bool is_control_header(std::uint32_t word);
bool is_control_checksum(std::uint32_t word);
std::uint16_t control_header_counter(std::uint32_t word);
std::uint16_t control_checksum_value(std::uint32_t word);

/// One serializer pass: 32 data slots + the two control slots, each a
/// 26-bit word.
struct Frame {
    std::array<std::uint32_t, kFrameEntries> entries{};
};

/// A lane stream: one 2-bit symbol per cycle (values 0..3).
struct SymbolStream {
    std::vector<std::uint8_t> symbols;
    int cycles() const { return static_cast<int>(symbols.size()); }
};

/// Retrieves packet n alone. Stage 1 loads the frame and browses to entry n
/// (1 + n cycles, lane idles at 0), stage 2 then shifts the 26-bit packet
/// out MSB-first, two bits per cycle (13 cycles). Total 1 + n + 13.
SymbolStream retrieve_packet(const Frame& frame, int n);

/// Streams the whole frame: after the one-cycle load the stage-1 browse of
/// the next packet overlaps the stage-2 shift of the current one, so the 34
/// packets come out back to back: 1 + 34*13 = 443 cycles.
SymbolStream stream_frame(const Frame& frame);

/// Host-side inverse of retrieve_packet. Expects exactly 1 + n + 13 symbols.
std::uint32_t deserialize_single(std::span<const std::uint8_t> symbols, int n);

struct DecodedFrame {
    Frame frame;
    std::uint16_t frame_counter = 0;
    std::uint16_t reg_checksum = 0;
};

/// Host-side inverse of stream_frame. Validates stream length and the
/// control-packet magics; a caller-supplied expected checksum is compared
/// against slot 33.
DecodedFrame deserialize_frame(std::span<const std::uint8_t> symbols);
void verify_frame_checksum(const DecodedFrame& decoded, std::uint16_t expected);

// --- Bitstream trace files -------------------------------------------------
// Binary layout (little-endian): magic "RBST", u8 version, u8 sub_array,
// u8 mode (1 = single-packet, 2 = full-frame), u8 packet_index (mode 1),
// u64 cycle0 timestamp, u64 symbol count, then symbols packed four per byte,
// first symbol in bits 1:0.

inline constexpr char kTraceMagic[4] = {'R', 'B', 'S', 'T'};
inline constexpr std::uint8_t kTraceVersion = 1;
inline constexpr std::uint8_t kTraceModeSingle = 1;
inline constexpr std::uint8_t kTraceModeFrame = 2;

struct BitstreamTrace {
    std::uint8_t sub_array = 0;
    std::uint8_t mode = kTraceModeFrame;
    std::uint8_t packet_index = 0;  // meaningful in single-packet mode
    std::uint64_t cycle0 = 0;
    std::vector<std::uint8_t> symbols;
};

std::vector<std::uint8_t> pack_symbols(std::span<const std::uint8_t> symbols);
std::vector<std::uint8_t> unpack_symbols(std::span<const std::uint8_t> bytes,
                                         std::uint64_t count);

void write_trace_file(const std::string& path, const BitstreamTrace& trace);
BitstreamTrace read_trace_file(const std::string& path);

}  // namespace rramchar
