#ifndef RRAMCHAR_CAPI_H
#define RRAMCHAR_CAPI_H

/* C API for the rramchar simulator. All entry points return an error code
 * (rc_ok on success) and never throw across the boundary. Handles are opaque;
 * destroy functions accept NULL. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RC_API __declspec(dllexport)
#else
#define RC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rc_status {
    rc_ok = 0,
    rc_err_usage = 1,
    rc_err_range = 2,
    rc_err_io = 3,
    rc_err_integrity = 4,
    rc_err_busy = 5,
    rc_err_parse = 6
} rc_status;

typedef struct rc_chip rc_chip;     /* simulator + attached driver */

typedef struct rc_measurement {
    int32_t sub_array;
    int32_t row;
    int32_t col;
    int32_t polarity; /* 0 forward, 1 reverse */
    double v_dut_volts;
    uint8_t dac_code;
    uint16_t adc_code;
    uint8_t gain_sel;
    uint8_t flags; /* bit0 sat_low, bit1 sat_high */
    double i_amps;
    double r_ohms;
    double sim_time_s;
    double r_true_ohms; /* < 0 when not attached */
} rc_measurement;

/* Most recent error message on this thread (empty string if none). */
RC_API const char* rc_last_error(void);

/* config_json: NULL/empty for defaults, else a JSON config document. */
RC_API rc_status rc_chip_create(const char* config_json, rc_chip** out);
RC_API rc_status rc_chip_create_from_config_file(const char* path, rc_chip** out);
RC_API void rc_chip_destroy(rc_chip* chip);

/* Raw register access (recorded in the transcript when active). */
RC_API rc_status rc_chip_spi(rc_chip* chip, int rw, uint8_t reg_addr,
                             uint16_t payload, uint16_t* out_value);
RC_API rc_status rc_chip_run_ticks(rc_chip* chip, uint64_t ticks);
RC_API rc_status rc_chip_time_ticks(rc_chip* chip, int sub_array, uint64_t* out);

/* Population: JSON text or file; digest is the 16-bit population digest. */
RC_API rc_status rc_chip_populate(rc_chip* chip, const char* population_json,
                                  uint64_t seed_override, int use_override,
                                  uint16_t* out_digest);
RC_API rc_status rc_chip_populate_file(rc_chip* chip, const char* path,
                                       uint64_t seed_override, int use_override,
                                       uint16_t* out_digest);

RC_API rc_status rc_chip_write_cell(rc_chip* chip, int sub_array, int row,
                                    int col, double v_dut_volts, int reverse,
                                    double width_s);
RC_API rc_status rc_chip_read_cell(rc_chip* chip, int sub_array, int row,
                                   int col, double v_read_volts, int reverse,
                                   rc_measurement* out);

/* IV sweep on one cell. polarity_mode: 0 fwd, 1 rev, 2 both. Caller owns
 * *out_records via rc_free_measurements. */
RC_API rc_status rc_chip_iv_sweep(rc_chip* chip, int sub_array, int row, int col,
                                  double v_start, double v_stop, double v_step,
                                  int polarity_mode, int hysteresis_loop,
                                  rc_measurement** out_records, size_t* out_count);

/* Frame-based readout of an inclusive address rectangle. sub_array -1 covers
 * all four sub-arrays (parallelizable with jobs > 1). */
RC_API rc_status rc_chip_mass_read(rc_chip* chip, int sub_array, int row_first,
                                   int row_last, int col_first, int col_last,
                                   double v_read_volts, int jobs,
                                   rc_measurement** out_records, size_t* out_count);

RC_API void rc_free_measurements(rc_measurement* records);

/* Transcript recording / replay. */
RC_API rc_status rc_chip_transcript_start(rc_chip* chip, const char* path);
RC_API rc_status rc_chip_transcript_stop(rc_chip* chip);
RC_API rc_status rc_chip_replay(rc_chip* chip, const char* path,
                                uint64_t* out_bitstream_hash);

/* Replay that also decodes every read operation into a measurement CSV. */
RC_API rc_status rc_chip_replay_decode(rc_chip* chip, const char* transcript_path,
                                       const char* csv_path,
                                       uint64_t* out_bitstream_hash);

/* Serial capture: enable before running operations, then query/save. */
RC_API rc_status rc_chip_trace_enable(rc_chip* chip, int on);
RC_API rc_status rc_chip_bitstream_hash(rc_chip* chip, uint64_t* out_hash);
/* mode: 1 = single-packet stream (packet_index = frame slot), 2 = frames. */
RC_API rc_status rc_chip_save_trace(rc_chip* chip, int sub_array, const char* path,
                                    int mode, int packet_index);

/* Decodes a saved trace into a packet CSV (csv_path NULL writes to stdout). */
RC_API rc_status rc_decode_trace_file(const char* trace_path, const char* csv_path);

/* Measurement CSV helpers (one row, no newline). */
RC_API const char* rc_measurement_csv_header(void);
RC_API rc_status rc_measurement_csv(const rc_measurement* m, char* buf,
                                    size_t buf_len);

/* Aggregate statistics over a record set, rendered as text. */
RC_API rc_status rc_mass_summary(const rc_measurement* records, size_t count,
                                 double wall_seconds, char* buf, size_t buf_len);

/* Validates a population file and writes the normalized form. */
RC_API rc_status rc_population_normalize(const char* in_path, const char* out_path,
                                         uint64_t seed_override, int use_override);

RC_API rc_status rc_chip_population_digest(rc_chip* chip, uint16_t* out_digest);

RC_API const char* rc_version(void);

#ifdef __cplusplus
}
#endif

#endif /* RRAMCHAR_CAPI_H */
