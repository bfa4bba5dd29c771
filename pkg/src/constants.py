# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""This module defines constants used throughout the application."""

VERSION = "0.1.0"

POINT_TOL = 1e-10
BALL_TOL = 1e-12
FEASIBILITY_TOL = 1e-6
# below this norm a tangent step is treated with its first-order expansion
SMALL_NORM = 1e-12

FRECHET_TOL = 1e-10
FRECHET_MAX_ITER = 200
# variances at or below this are treated as a single point
DEGENERATE_VARIANCE_TOL = 1e-20
COMPARATOR_TOL = 1e-8
COMPARATOR_MAX_ITER = 500
COMPARATOR_RESTARTS = 10

GRADIENT_BLOWUP_FACTOR = 10.0
FD_RELATIVE_STEP = 1e-4

DEFAULT_HORIZON = 2000
DEFAULT_BASE_SPREAD_DIVISOR = 16

CSV_HEADER = ("t", "inst_regret", "cum_regret", "variance", "network_error")
CSV_SIGNIFICANT_DIGITS = 12
OUTPUT_DIR_ENV = "GEODESIC_GOSSIP_OUTPUT_DIR"
