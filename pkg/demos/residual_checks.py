"""Evaluate the printed evolution equations on an exact solution.

The flow is computed from the support function, so each printed equation
can be tested by plugging the solution in and measuring what is left over.
Two readings of the section equation are compared, as are both signs of the
reaction term in the lambda equation.
"""

import json

from mrcf import cli_io

battery = cli_io.verify(12)
print(json.dumps(battery, indent=2, sort_keys=True, default=str))
