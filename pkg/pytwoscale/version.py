from __future__ import absolute_import, division, print_function
from os.path import join as pjoin

# Format expected by setup.py: string of form "X.Y.Z"
_version_major = 0
_version_minor = 1
_version_micro = ''  # use '' for first of series, number for 1 and above
_version_extra = 'dev'
# _version_extra = ''  # Uncomment this for full releases

# Construct full version string from these.
_ver = [_version_major, _version_minor]
if _version_micro:
    _ver.append(_version_micro)
if _version_extra:
    _ver.append(_version_extra)

__version__ = '.'.join(map(str, _ver))

CLASSIFIERS = ["Development Status :: 3 - Alpha",
               "Environment :: Console",
               "Intended Audience :: Science/Research",
               "License :: OSI Approved :: BSD License",
               "Operating System :: OS Independent",
               "Programming Language :: Python",
               "Topic :: Scientific/Engineering :: Mathematics"]

# Description should be a one-liner:
description = ("pytwoscale: smooth hazards over one and two time scales "
               "with P-splines")
# Long description will go up on the pypi page
long_description = """
PyTwoScale
==========
PyTwoScale estimates hazard functions of survival data that vary over one
or two time scales. Events and exposure times are binned on a regular grid
of the Lexis plane and the log-hazard is modelled with B-splines and a
difference penalty (P-splines) in a penalized Poisson regression. Two
dimensional fits use array arithmetic (GLAM) so the tensor-product
regression matrix is never formed, and a proportional hazards model with a
two dimensional baseline is available. Smoothing parameters are chosen by
minimizing AIC. A simulation harness generates data from known hazard
surfaces under several censoring and truncation schemes.
License
=======
``pytwoscale`` is licensed under the terms of the BSD-3 license. See the file
"LICENSE" for information on the history of this software, terms & conditions
for usage, and a DISCLAIMER OF ALL WARRANTIES.
"""

NAME = "pytwoscale"
MAINTAINER = "PyTwoScale developers"
MAINTAINER_EMAIL = ""
DESCRIPTION = description
LONG_DESCRIPTION = long_description
URL = ""
DOWNLOAD_URL = ""
LICENSE = "BSD-3"
AUTHOR = "PyTwoScale developers"
AUTHOR_EMAIL = ""
PLATFORMS = "OS Independent"
MAJOR = _version_major
MINOR = _version_minor
MICRO = _version_micro
VERSION = __version__
PACKAGE_DATA = {'pytwoscale': [pjoin('data', '*.csv'),
                               'report_template.txt']}
REQUIRES = ['numpy', 'scipy >= 1.8', 'pandas', 'jinja2']
TESTS_REQUIRE = ['pytest', 'hypothesis']
PYTHON_REQUIRES = ">= 3.8"
