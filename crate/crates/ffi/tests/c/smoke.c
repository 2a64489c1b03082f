#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "firegrid.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    rewind(f);
    char *buf = malloc((size_t)n + 1);
    if (fread(buf, 1, (size_t)n, f) != (size_t)n) {
        fclose(f);
        free(buf);
        return NULL;
    }
    buf[n] = 0;
    fclose(f);
    return buf;
}

static const char *RISK =
    "{\"days\":[201,202],\"lines\":[\"diag\",\"bend\",\"tie\"],"
    "\"line_day_risk\":[[400,200],[160,180],[200,0]],"
    "\"thresholds\":{\"r_psps\":500,\"r_high\":1e6,\"r_low\":1}}";

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    char *json = slurp(argv[1]);
    if (!json) return 2;

    FgNetwork *net = NULL;
    FgRisk *risk = NULL;
    FgModel *model = NULL;
    FgSolution *sol = NULL;
    if (fg_network_from_json(json, &net) != FG_STATUS_OK) {
        fprintf(stderr, "%s\n", fg_last_error_message());
        return 1;
    }
    free(json);
    if (fg_risk_from_json(RISK, &risk) != FG_STATUS_OK ||
        fg_model_build(net, risk, "BL-M1", 1.0, NULL, &model) != FG_STATUS_OK ||
        fg_solve(model, 0.0, 60.0, &sol) != FG_STATUS_OK) {
        fprintf(stderr, "%s\n", fg_last_error_message());
        return 1;
    }
    FgSolveStatus st;
    double obj = 0.0;
    fg_solution_status(sol, &st);
    fg_solution_objective(sol, &obj);
    printf("status %d objective %.6f\n", (int)st, obj);

    char *metrics = NULL;
    if (fg_group_metrics_json(net, risk, sol, &metrics) == FG_STATUS_OK) {
        printf("metrics %zu bytes\n", strlen(metrics));
        fg_string_free(metrics);
    }

    FgNetwork *bad = NULL;
    printf("bad json -> %d\n", (int)fg_network_from_json("{", &bad));

    fg_solution_free(sol);
    fg_model_free(model);
    fg_risk_free(risk);
    fg_network_free(net);
    return 0;
}
