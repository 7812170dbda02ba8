#include <stdio.h>
#include <string.h>
#include "holonomy.h"

int main(void) {
    HolonomyAnsatz *a = NULL;
    if (holonomy_ansatz_builtin("yasui_ootsuka", &a) != HOLONOMY_OK) {
        fprintf(stderr, "builtin: %s\n", holonomy_last_error());
        return 1;
    }
    double r = -1.0;
    if (holonomy_verify(a, 1, 50, 42, &r) != HOLONOMY_OK || !(r < 1e-9)) {
        fprintf(stderr, "verify: %g\n", r);
        return 1;
    }
    HolonomyFlow *f = NULL;
    if (holonomy_derive(a, &f) != HOLONOMY_OK) {
        fprintf(stderr, "derive: %s\n", holonomy_last_error());
        return 1;
    }
    size_t need = 0;
    holonomy_flow_render(f, NULL, 0, &need);
    char buf[1024];
    if (need > sizeof buf || holonomy_flow_render(f, buf, sizeof buf, NULL) != HOLONOMY_OK) {
        return 1;
    }
    printf("%s", buf);
    if (holonomy_ansatz_builtin("nope", &a) != HOLONOMY_UNKNOWN_BUILTIN) {
        return 1;
    }
    holonomy_flow_free(f);
    holonomy_ansatz_free(a);
    return strstr(buf, "db/dx") ? 0 : 1;
}
