"""polyclass: shape classification from compact polygonal representations.

Images are thresholded, their main contour traced, and either the contour
chain itself or an optimized dominant-point polygon becomes the input to a
small self-attention + Conv1D sequence classifier.
"""

__version__ = "0.1.0"
