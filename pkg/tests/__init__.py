# Tests package for blockvar
