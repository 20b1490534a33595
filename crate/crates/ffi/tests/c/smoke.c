#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "toric_gauge.h"

int main(void) {
    TgConfig *cfg = NULL;
    if (tg_config_parse("[realmeas]\nangles = 1.5\n", &cfg) != TG_STATUS_OK) return 1;
    TgResult *res = NULL;
    if (tg_run(cfg, "realmeas", &res) != TG_STATUS_OK) return 2;
    size_t need = 0;
    if (tg_result_table_csv(res, 0, NULL, 0, &need) != TG_STATUS_BUFFER_TOO_SMALL) return 3;
    char *buf = malloc(need);
    if (tg_result_table_csv(res, 0, buf, need, NULL) != TG_STATUS_OK) return 4;
    printf("%s", buf);
    free(buf);
    tg_result_free(res);
    tg_config_free(cfg);
    double m = 0;
    if (tg_coherent_error_magnitude(INFINITY, &m) != TG_STATUS_INVALID_ARGUMENT) return 5;
    char msg[256];
    if (tg_last_error(msg, sizeof msg, NULL) != TG_STATUS_OK) return 6;
    printf("error: %s\nversion %s\n", msg, tg_version());
    return 0;
}
