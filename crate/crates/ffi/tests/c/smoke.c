#include <math.h>
#include <stdio.h>
#include "epdiff_blowup.h"

static int fail(const char *what) {
    fprintf(stderr, "%s: %s\n", what, epd_last_error_message());
    return 1;
}

int main(void) {
    EpdKernel *kernel = NULL;
    if (epd_kernel_new(2, 5, &kernel) != EPD_STATUS_OK) return fail("kernel_new");
    double c = 0.0;
    if (epd_kernel_comparison_constant(kernel, &c) != EPD_STATUS_OK) return fail("comparison_constant");
    epd_kernel_free(kernel);
    if (fabs(c - 1.0 / 35.0) > 1e-15) return fail("C_est");

    if (epd_kernel_new(3, 4, &kernel) != EPD_STATUS_INVALID_ARGUMENT || kernel != NULL) return 1;

    EpdSimParams p = epd_sim_params_default(3, 1);
    p.points = 128;
    EpdSimulation *sim = NULL;
    if (epd_simulation_run(&p, &sim) != EPD_STATUS_OK) return fail("simulation_run");
    EpdReport report;
    if (epd_simulation_report(sim, &report) != EPD_STATUS_OK) return fail("simulation_report");
    epd_simulation_free(sim);
    if (!report.blew_up || !report.has_t_est) return fail("blowup");
    printf("T_est = %.6f\n", report.t_est);
    return 0;
}
