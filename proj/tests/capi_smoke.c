/* Compiled as C99: proves the public header is C-clean and the ABI works
 * without any C++ runtime knowledge on the caller's side. */
#include <stdio.h>
#include <string.h>

#include "rramchar/capi.h"

static int failures = 0;

#define EXPECT(cond, what)                                  \
    do {                                                    \
        if (!(cond)) {                                      \
            ++failures;                                     \
            fprintf(stderr, "FAIL: %s\n", what);            \
        }                                                   \
    } while (0)

int main(void) {
    rc_chip* chip = NULL;
    uint16_t value = 0;
    rc_measurement m;
    memset(&m, 0, sizeof m);

    EXPECT(rc_chip_create(NULL, &chip) == rc_ok, "create");
    EXPECT(chip != NULL, "handle");

    EXPECT(rc_chip_spi(chip, 0, 0x00, 0, &value) == rc_ok, "spi read");
    EXPECT(value == 0x1712, "chip id");

    /* unpopulated cells default to 1 Mohm linear devices */
    EXPECT(rc_chip_read_cell(chip, 0, 1, 2, 0.5, 0, &m) == rc_ok, "read cell");
    EXPECT(m.flags == 0, "unflagged");
    EXPECT(m.r_ohms > 0.98e6 && m.r_ohms < 1.02e6, "resistance near 1M");

    /* error path sets a message and a mapped status */
    EXPECT(rc_chip_read_cell(chip, 9, 0, 0, 0.5, 0, &m) == rc_err_range, "bad sub");
    EXPECT(strlen(rc_last_error()) > 0, "error message");

    EXPECT(strlen(rc_version()) > 0, "version");

    rc_chip_destroy(chip);
    rc_chip_destroy(NULL);

    if (failures) {
        fprintf(stderr, "%d smoke check(s) failed\n", failures);
        return 1;
    }
    printf("capi smoke: all checks passed\n");
    return 0;
}
