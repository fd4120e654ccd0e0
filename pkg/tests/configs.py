"""Small run configurations shared by the CLI and acceptance tests."""

# every stage at coarse resolution; about two seconds end to end
FAST = """\
[run]
command = all
output = unused
seed = 7

[nearfield]
R = 2
spacings = 1/4, 1/8

[mixed]
R = 2
h = 1/8

[scattering]
R = 2
h = 1/8
convergence_spacings = 1/8

[bands]
n_per_axis = 9
path_points = 4

[friedrichs]
R = 2
n_samples = 200
h = 1/100

[floquet]
eps = 1/2, 1/3
"""

# one PASS/FAIL line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
