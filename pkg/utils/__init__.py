# Shared helpers: errors and output writing
