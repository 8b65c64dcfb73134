"""Preference-based RL with semi-supervised reward learning.

An off-policy agent is trained from a reward model that is itself learned
from pairwise preferences over behavior segments.  Label efficiency comes
from pseudo-labeling unlabeled segment pairs above a confidence threshold
and from temporal-crop augmentation of the compared segments.
"""

__version__ = "0.1.0"
