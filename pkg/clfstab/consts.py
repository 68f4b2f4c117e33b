# exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SIMULATION = 3
EXIT_CHECK_FAILED = 4

# artifact formats
SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = '%.17g'
MAX_SWEEP_CELLS = 10 ** 6

# numerical tolerances
AFFINE_TOL = 1e-9
EQUILIBRIUM_TOL = 1e-12
TIE_RTOL = 1e-12
CHECK_TOL = 1e-9
RANK_RTOL = 1e-10
INVERSE_TOL = 1e-8
MIN_K_SLOPE = 1e-12

# verdicts
FAILS = 'fails_necessary_condition'
INCONCLUSIVE = 'inconclusive'
EXACT = 'exact'
EMPIRICAL = 'empirical'

# feedback provenance and continuity
SMOOTH = 'smooth'
CONTINUOUS = 'continuous'
DISCONTINUOUS = 'measurable-discontinuous'
UNIVERSAL = 'universal-formula'
POINTWISE_MIN = 'pointwise-min'
PROXIMAL = 'proximal'
USER = 'user'
