"""Interactive multi-agent driving toolkit.

Subpackages: diffcore (tape autodiff), dynamics (unicycle model),
scene (data model, formats, synthetic traffic), policy (the interactive
prediction network), trainer (imitation learning), planner (CEM-based
game-theoretic MPC), metrics (displacement/collision evaluation).
"""

__version__ = "0.1.0"
