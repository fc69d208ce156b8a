"""
This file contains filepaths to data stored in ``pytwoscale``.

To access the data, simply include the following line in your script:

```py
import pytwoscale.data.library as pdl

x = pdl.example_records
```
or
```py
from pytwoscale.data.library import example_records
```
"""

import os
curr_dir = os.path.dirname(__file__)


"""
``example_records`` : dataset
columns : [id, u, s_in, s_out, event, treat, male]
    * ``u`` is the time from the origin of ``t`` to the origin of ``s``.
      Units: days
    * ``s_in`` and ``s_out`` are entry and exit times on ``s``. Units: days
    * ``event`` is 1 for an event, 0 for right censoring
    * ``treat`` and ``male`` are binary covariates
A small hand made set of 36 subjects in the records CSV format, with a few
late entries. Enough to try every command; far too small for serious
smoothing.
"""
example_records = os.path.join(curr_dir, "example_records.csv")
