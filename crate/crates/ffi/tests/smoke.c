#include <math.h>
#include <stdio.h>
#include <string.h>

#include "mala_lab.h"

#define CHECK(cond)                                          \
    do {                                                     \
        if (!(cond)) {                                       \
            fprintf(stderr, "failed: %s (line %d)\n", #cond, \
                    __LINE__);                               \
            return 1;                                        \
        }                                                    \
    } while (0)

int main(void) {
    MalaPotential *p = NULL;
    CHECK(mala_potential_parse("kind=adversarial;d=8;eta=0.2", &p) == MALA_STATUS_OK);
    CHECK(mala_potential_dim(p) == 8);

    double x[8] = {0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5, 0.25};
    double v = 0.0, g[8];
    CHECK(mala_potential_evaluate(p, x, 8, &v, g) == MALA_STATUS_OK);
    CHECK(isfinite(v));

    MalaChain *c = NULL;
    CHECK(mala_chain_new(p, MALA_KERNEL_MALA, 0.2, x, 8, 42, &c) == MALA_STATUS_OK);
    int32_t acc = 0;
    for (int i = 0; i < 50; i++) CHECK(mala_chain_step(c, &acc) == MALA_STATUS_OK);
    CHECK(mala_chain_state(c, x, 8) == MALA_STATUS_OK);
    mala_chain_free(c);

    MalaPotential *bad = NULL;
    CHECK(mala_potential_new_adversarial(8, 0.9, &bad) == MALA_STATUS_INVALID_INPUT);
    CHECK(strstr(mala_last_error_message(), "eta") != NULL);

    double pi[2] = {2.0 / 3.0, 1.0 / 3.0};
    double q[4] = {0.5, 0.5, 0.5, 0.5};
    double gap = 0.0, cond = 0.0;
    CHECK(mala_finite_spectral_gap(2, pi, q, &gap, &cond) == MALA_STATUS_OK);
    CHECK(fabs(gap - 0.75) < 1e-12);

    mala_potential_free(p);
    printf("ok\n");
    return 0;
}
