# Experiment, run and sweep schemas
