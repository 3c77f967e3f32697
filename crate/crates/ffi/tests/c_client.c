#include <stdio.h>
#include <string.h>
#include "skillchain.h"

int main(void) {
    ScExperiment *exp = NULL;
    if (sc_experiment_from_toml("method = \"nope\"", &exp) != SC_STATUS_INVALID_CONFIG || exp != NULL) {
        return 1;
    }
    char msg[512];
    if (sc_last_error(msg, sizeof msg) == 0 || strstr(msg, "nope") == NULL) {
        return 2;
    }
    if (sc_experiment_from_toml("task = \"chain_world_conflict\"\nseeds = [0]\n", &exp) != SC_STATUS_OK) {
        return 3;
    }
    char hash[32];
    if (sc_experiment_hash(exp, hash, sizeof hash) != SC_STATUS_OK || strlen(hash) != 16) {
        return 4;
    }
    sc_experiment_free(exp);

    ScChainWorld *w = NULL;
    double v = 0.0;
    if (sc_chain_world_new(true, &w) != SC_STATUS_OK) {
        return 5;
    }
    if (sc_chain_world_value(w, 1, 0.0, 101, true, &v) != SC_STATUS_OK) {
        return 6;
    }
    sc_chain_world_free(w);
    printf("%.6f\n", v);
    return 0;
}
