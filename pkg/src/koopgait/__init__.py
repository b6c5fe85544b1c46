"""Factor-graph lower-body pose estimation with Koopman motion priors."""

__version__ = "0.1.0"
