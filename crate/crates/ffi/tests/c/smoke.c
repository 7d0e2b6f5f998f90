#include <math.h>
#include <stdio.h>
#include <string.h>

#include "dulackit.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                 \
        }                                                             \
    } while (0)

static const char *EULER =
    "{\"family\": {\"mu\": 1, \"terms\": [{\"x\": 2, \"eps\": 0, \"c\": 1},"
    " {\"x\": 1, \"eps\": 1, \"c\": -1}]}, \"U\": [0, -1]}";

int main(void) {
    DulacSpec *spec = NULL;
    DulacExpansion *exp = NULL;
    double c[8];
    double g = 0.0;

    CHECK(dulac_spec_from_json(EULER, &spec) == DULAC_STATUS_OK);
    CHECK(dulac_expand(spec, 0, 5, &exp) == DULAC_STATUS_OK);
    CHECK(dulac_expansion_len(exp) == 6);
    CHECK(dulac_expansion_is_exact(exp) == 1);
    CHECK(dulac_expansion_coeffs(exp, c, 2) == DULAC_STATUS_BUFFER_TOO_SMALL);
    CHECK(dulac_last_error() != NULL);
    CHECK(dulac_expansion_coeffs(exp, c, 8) == DULAC_STATUS_OK);
    CHECK(c[0] == 0.0 && c[1] == -1.0 && c[5] == -24.0);
    CHECK(strcmp(dulac_expansion_coeff_text(exp, 4), "-6") == 0);
    CHECK(dulac_expansion_coeff_text(exp, 6) == NULL);
    dulac_expansion_free(exp);
    dulac_spec_free(spec);

    CHECK(dulac_spec_from_json("{", &spec) == DULAC_STATUS_PARSE_ERROR);
    CHECK(spec == NULL);
    CHECK(dulac_gamma(5.0, &g) == DULAC_STATUS_OK && g == 24.0);
    CHECK(dulac_gamma(-1.0, &g) == DULAC_STATUS_INVALID_ARGUMENT);
    CHECK(dulac_loud_c1_hat(-0.25, 0.9999, &g) == DULAC_STATUS_OK);
    CHECK(fabs(g - 2.0 * 0.5 / pow(0.75, 1.5)) < 1e-2);
    printf("dulackit %s ok\n", dulac_version());
    return 0;
}
