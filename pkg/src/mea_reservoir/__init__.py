"""Simulated multi-electrode-array reservoir computing pipeline.

Digits are encoded as bipolar stimulation patterns on a 64x64 electrode grid,
driven into a simulated cortical culture, read out as windowed spike counts
and classified by a softmax perceptron. An artificial reservoir serves as the
engineered baseline.
"""

__version__ = "0.1.0"
