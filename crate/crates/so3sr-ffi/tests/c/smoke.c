#include <math.h>
#include <stdio.h>
#include "so3sr.h"

int main(void) {
    So3srKernel *k = NULL;
    if (so3sr_kernel_new(8, 40, &k) != SO3SR_OK) return 10;
    double id[4] = {1.0, 0.0, 0.0, 0.0};
    double v = 0.0;
    if (so3sr_kernel_sigma(k, id, id, &v) != SO3SR_OK || fabs(v - 1.0) > 1e-12) return 11;
    double cs = 0.0;
    if (so3sr_kernel_constant(k, "c_s", &cs) != SO3SR_OK || fabs(cs - 0.999 / 18.0) > 1e-15) return 12;

    double centers[4] = {1.0, 0.0, 0.0, 0.0};
    int8_t signs[1] = {-1};
    So3srCertificate *c = NULL;
    if (so3sr_certificate_new(k, centers, signs, 1, &c) != SO3SR_OK) return 13;
    double q = 0.0, g[3];
    if (so3sr_certificate_eval(c, id, &q, g) != SO3SR_OK || fabs(q + 1.0) > 1e-10) return 14;

    So3srKernel *bad = NULL;
    if (so3sr_kernel_new(7, 40, &bad) != SO3SR_ERR_DOMAIN || bad != NULL) return 15;
    char msg[128];
    if (so3sr_last_error(msg, sizeof msg) == 0) return 16;

    so3sr_certificate_free(c);
    so3sr_kernel_free(k);
    printf("ok\n");
    return 0;
}
