#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "ris_bsum.h"

#define CHECK(call)                                                   \
    do {                                                              \
        RisStatus s_ = (call);                                        \
        if (s_ != RIS_STATUS_OK) {                                    \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,         \
                    ris_last_error() ? ris_last_error() : "(none)");  \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    const size_t m = 8, n = 4, k = 3;
    RisChannels *ch = NULL;
    CHECK(ris_channels_generate(m, n, k, 7, 10.0, -80.0, -80.0, &ch));

    size_t dm = 0, dn = 0, dk = 0;
    CHECK(ris_channels_dims(ch, &dm, &dn, &dk));
    if (dm != m || dn != n || dk != k) return 2;

    double total = ris_dbm_to_watts(30.0);
    double eta[4] = {8.0, 8.0, 8.0, 8.0};
    RisSolverOptions opts = ris_solver_options_default();
    RisSolution *sol = NULL;
    CHECK(ris_solve(ch, 0.99 * total, 0.01 * total, eta, false, &opts, &sol));

    RisComplex w[8 * 3], phi[4];
    CHECK(ris_solution_precoder(sol, w, m * k));
    CHECK(ris_solution_reflect(sol, phi, n));
    double rate = 0.0;
    CHECK(ris_sum_rate(ch, w, phi, &rate));
    if (fabs(rate - ris_solution_sum_rate(sol)) > 1e-9 * rate) return 3;
    if (!(ris_solution_max_residual(sol) <= 1e-8)) return 4;

    if (ris_solution_precoder(sol, w, 2) != RIS_STATUS_BUFFER_TOO_SMALL) return 5;
    if (ris_last_error() == NULL) return 6;

    printf("ris-bsum %s: %zu iterations, %.4f bits/s/Hz\n", ris_version(), ris_solution_iterations(sol), rate);
    ris_solution_free(sol);
    ris_channels_free(ch);
    return 0;
}
