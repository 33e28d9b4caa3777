#include <stdio.h>
#include <stdlib.h>

#include "tnsp.h"

int main(void) {
    double re[8], im[8];
    size_t len = 0;
    if (tnsp_channel_spectrum(TNSP_FAMILY_BINARY1D, TNSP_FLAVOR_MERA, TNSP_MOVER_RIGHT, 2, re, im, 8, &len) != TNSP_STATUS_OK) {
        fprintf(stderr, "%s\n", tnsp_last_error());
        return 1;
    }
    TnspMps *mps = NULL;
    TnspTerm *term = NULL;
    double energy = 0.0;
    if (tnsp_mps_random(8, 2, 4, 5, &mps) != TNSP_STATUS_OK || tnsp_term_tfim(1.0, 2, &term) != TNSP_STATUS_OK ||
        tnsp_mps_energy(mps, term, &energy) != TNSP_STATUS_OK) {
        fprintf(stderr, "%s\n", tnsp_last_error());
        return 1;
    }
    tnsp_term_free(term);
    tnsp_mps_free(mps);
    if (tnsp_mps_random(8, 2, 4, 5, NULL) != TNSP_STATUS_NULL_POINTER) {
        return 1;
    }
    printf("%zu %.6f %.6f\n", len, re[1], energy);
    return 0;
}
