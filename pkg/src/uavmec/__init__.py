"""Sub-THz UAV edge-computing simulator with multi-agent resource learning.

Submodules:

* ``config``   -- every physical and learning constant, file/env loading
* ``netmodel`` -- pure per-slot link, computation, and flight formulas
* ``alloc``    -- exact CPU cycle-rate allocation plus a grid oracle
* ``envsim``   -- the time-slotted world, rewards, fairness baselines
* ``autodiff`` / ``nn`` -- minimal reverse-mode core and network blocks
* ``ppo``      -- advantage estimation and clipped-surrogate updates
* ``trainer``  -- training orchestration, evaluation, checkpoints
* ``metrics`` / ``export`` -- run tables and plot-ready figure CSVs
* ``cli``      -- the ``uavmec`` command

Kept import-light on purpose: the command-line front end pins BLAS
threading before numpy loads.
"""

__version__ = "0.1.0"
