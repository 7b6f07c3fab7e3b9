# Experiment and science-table readers
