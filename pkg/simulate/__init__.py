# Science-table generation, assignment draws and Monte Carlo studies
