"""Pairwise attribute ranking: a convex linear rank SVM and a Siamese network
trained with the same loss."""

from ._deeprank import *  # noqa: F401,F403
from ._deeprank import __version__  # noqa: F401
