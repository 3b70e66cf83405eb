#include <stdio.h>
#include <string.h>
#include "lamina.h"

static const char *PROBLEM =
    "{\"domain\": {\"grid\": {\"nx\": 8, \"ny\": 8, \"h\": 0.125}, \"mask\": \"rect\", \"metric\": \"euclidean\"},"
    " \"boundary\": {\"kind\": \"expr\", \"expr\": \"x\"}}";

int main(void) {
    LaminaProblem *p = NULL;
    LaminaSolution *s = NULL;
    double cut, e, gap, u[81];
    size_t nx, ny, len = 81;
    double h;
    bool converged;

    if (lamina_problem_from_json("{\"domain\": 3}", NULL, &p) != LAMINA_STATUS_CONFIG || p != NULL) return 1;
    if (strstr(lamina_last_error(), "/domain") == NULL) return 2;
    if (lamina_problem_from_json(PROBLEM, NULL, &p) != LAMINA_STATUS_OK) return 3;
    if (lamina_problem_grid(p, &nx, &ny, &h) != LAMINA_STATUS_OK || nx != 8 || ny != 8 || h != 0.125) return 4;
    if (lamina_mincut_energy(p, 64, &cut) != LAMINA_STATUS_OK) return 5;
    if (lamina_solve(p, 0, &s) != LAMINA_STATUS_OK) return 6;
    if (lamina_solution_summary(s, &e, &gap, &converged) != LAMINA_STATUS_OK || !converged) return 7;
    if (lamina_solution_values(s, u, &len) != LAMINA_STATUS_OK || len != 81) return 8;
    printf("%s energy %.6f cut %.6f u[40] %.4f\n", lamina_version(), e, cut, u[40]);
    lamina_solution_free(s);
    lamina_problem_free(p);
    return (e - cut) / cut < 0.01 && (e - cut) / cut > -0.01 ? 0 : 9;
}
