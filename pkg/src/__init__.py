# Time-bin link characterization lab
__version__ = "0.1.0"
