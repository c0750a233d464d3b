"""drops2d: boundary-integral simulation of 2D Stokes drops and bubbles.

Spectrally accurate interface tracking for clean and insoluble-surfactant
covered drops, with the exact/semi-analytic conformal-map solutions used
to validate the solver packaged as first-class modules.
"""

__version__ = "0.1.0"
