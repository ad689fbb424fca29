#include <stdio.h>
#include <string.h>
#include "relmaze.h"

int main(void) {
    RmMaze *maze = NULL;
    if (rm_maze_from_text("S...\n.##.\n...G", &maze) != RM_OK) {
        fprintf(stderr, "parse: %s\n", rm_last_error());
        return 1;
    }
    int64_t len = 0;
    rm_maze_shortest_path(maze, &len);
    RmRun *run = NULL;
    if (rm_run_s2rcql(maze, RM_PROPOSER_ORACLE, 0.0, 7, 0, &run) != RM_OK) {
        fprintf(stderr, "run: %s\n", rm_last_error());
        return 1;
    }
    bool ok = false;
    size_t steps = 0;
    rm_run_outcome(run, &ok, &steps);
    RmStatus bad = rm_maze_from_text("{", &maze);
    printf("len=%lld ok=%d steps=%zu bad=%s\n", (long long)len, ok, steps, rm_status_str(bad));
    rm_run_free(run);
    rm_maze_free(maze);
    return 0;
}
