from pathlib import Path
import platform

############
### MISC ###
############

APPNAME = "perc-lab"

DEFAULT_SEED = 20170601
"""
Master seed used when neither `--seed` nor the `seed` config key is given. Never derived from wall-clock time
"""

POISSON_INVERSION_THRESHOLD = 16.0
"""
Poisson means below this value are drawn by inversion, above it by rejection. Part of the reproducibility contract
"""

###################
### TOLERANCES ###
###################

COORD_TOLERANCE = 1e-12
"""
Absolute tolerance for comparing coordinates once exact predicates have been applied
"""

LENGTH_TOLERANCE = 1e-9
"""
Shared boundaries shorter than this [length units] do not connect two pieces
"""

AREA_TOLERANCE = 1e-12
"""
Clipped pieces with smaller area are numerical slivers and are dropped
"""

#########################
### SAMPLING DEFAULTS ###
#########################

MIN_PADDING = 6.0
"""
Lower bound of the default window padding, in intensity-1 length units
"""

DEFAULT_FILL_SPACING = 0.25
"""
Lattice spacing of the extremal fill used by the annealed pivotality test
"""

EXHAUSTIVE_LIMIT = 20
"""
Largest number of points a region may hold for exhaustive recolouring of non-monotone events
"""

DEFAULT_EPSILON0 = 0.05
"""
Default threshold of the correlation length: smallest R with P_p[Cross(2R,R)] >= 1 - epsilon0
"""

DEFAULT_RASTER_RESOLUTION = 0.05
"""
Pixel size of the raster oracle
"""

PROGRESS_STEPS = 10
"""
Sample batches log their progress this many times
"""

#####################
### PATHS ON DISK ###
#####################


def _get_data_dir() -> Path:
    """
    Calculate the app data directory path based on platform.
    """
    match platform.system():
        case "Windows":
            return Path.home() / "AppData" / "Local" / APPNAME
        case _:  # Linux and Mac
            return Path(f"/tmp/{APPNAME}")


class PATH:
    """
    Class to store all relevant paths on disk
    """

    DATA_DIR = _get_data_dir()
    """Path to app data directory"""

    LOGS_DIR = DATA_DIR / "logs"
    """Path of logs directory"""
