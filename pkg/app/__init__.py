# DD-EF-SGD simulator: delayed, compressed distributed SGD with the DeCo planner
