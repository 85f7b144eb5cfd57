# HTTP routes for planning, timing, traces and training runs
