# helper constants
# used by the solver
EPS = 1e-9
# standalone note
x = EPS  # inline tail
