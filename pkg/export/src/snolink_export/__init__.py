"""Export tool producing the linking engine's input artifacts.

Encodes concept terms and mention surfaces into SNOEMB01 embedding files
and runs token classification to produce stage-1 label files. The engine
consumes only the files; no code is shared across the boundary.
"""

__version__ = "0.1.0"
