# -*- coding: utf-8 -*-
""" Global variables.
"""
import sys
from os.path import abspath, dirname, join


def _get_base_path():
    """Get the base path for bundled resources."""
    if getattr(sys, 'frozen', False) and hasattr(sys, '_MEIPASS'):
        return sys._MEIPASS
    return dirname(dirname(abspath(__file__)))


ROOT_PATH = _get_base_path()
CASES_PATH = join(ROOT_PATH, 'data', 'cases')

# Ordering of the stacked optimization vector X.
VARIABLE_GROUPS = ('Va', 'Vm', 'Pg', 'Qg', 'tau', 'theta')

# Central-difference steps and acceptance tolerances of the derivative oracle.
FD_STEP = 1e-6
FD_HESSIAN_STEP = 1e-5
FD_RTOL = 1e-6
FD_HESSIAN_RTOL = 5e-6
FD_ATOL = 1e-9
FD_MIN_SCALE = 1e-12

# Newton power flow.
PF_TOL = 1e-8
PF_MAX_ITER = 20

# Primal-dual interior point.
IPM_TOL = 1e-8
IPM_GRAD_TOL = 1e-6
IPM_MAX_ITER = 150
IPM_STEP_TO_BOUNDARY = 0.995
IPM_INITIAL_CENTERING = 0.1
IPM_SLACK_FLOOR = 0.1
IPM_REGULARIZATION = 1e-8
IPM_MAX_REGULARIZATION = 1e-2

# Slack within which a bound is reported as binding.
BINDING_TOL = 1e-6

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_NUMERIC_FAILURE = 2
EXIT_USAGE = 64
