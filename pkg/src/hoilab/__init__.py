"""hoilab: zero-shot human-object interaction detection at desk scale.

A self-contained lab for studying adapter-augmented frozen vision
transformers on synthetic interaction scenes: a float64 autodiff core,
locality/interaction adapters around a frozen backbone, compositional
text-embedding scoring, focal-loss training, and seen/unseen mAP
evaluation.
"""

from .tensor import ParamStore, Tensor

__version__ = "0.1.0"

__all__ = ["ParamStore", "Tensor", "__version__"]
