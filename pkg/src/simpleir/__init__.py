"""SimpleIR: an image restoration network and its review-driven training curriculum.

The package is a self-contained reference stack: a float64 autodiff core
(:mod:`simpleir.numerics`), the restoration network itself
(:mod:`simpleir.model`), the spatial + frequency objective and quality
metrics (:mod:`simpleir.objective`), entropy ranking / challenge
harvesting / stage planning (:mod:`simpleir.curriculum`), deterministic
synthetic datasets (:mod:`simpleir.data`), the training and evaluation
loops (:mod:`simpleir.pipeline`), and a command line front end
(:mod:`simpleir.cli`).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
