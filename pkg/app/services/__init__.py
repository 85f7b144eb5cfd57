# Compressor, timing model, planner, traces, tasks, trainer and run/sweep services
