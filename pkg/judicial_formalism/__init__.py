#!/usr/bin/env python3
#
#  __init__.py
"""
Corpus toolkit and classification pipeline for paragraph-level legal argument annotations.

The package is organised by concern:

* :mod:`judicial_formalism.corpus` -- the annotated decision data model, file IO, statistics and splits.
* :mod:`judicial_formalism.agreement` -- inter-annotator agreement (Cohen's kappa, Krippendorff's alpha).
* :mod:`judicial_formalism.metrics` -- binary and per-label positive/negative F1 evaluation.
* :mod:`judicial_formalism.features` and :mod:`judicial_formalism.mlp` -- the document feature
  vector and the formalism classifier trained on it.
* :mod:`judicial_formalism.attribution` -- exact Shapley attribution for the classifier.
* :mod:`judicial_formalism.baselines` -- majority, random and trigger-lexicon predictors.
* :mod:`judicial_formalism.pipeline` -- the three-stage formalism pipeline and its backend protocol.
* :mod:`judicial_formalism.analysis` -- distribution tables and temporal trends.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

__author__: str = "The judicial_formalism developers"
__copyright__: str = "2025 The judicial_formalism developers"
__license__: str = "MIT License"
__version__: str = "0.1.0"

__all__ = ["FORMAT_VERSION"]

#: The version written to (and required from) every file this package produces.
FORMAT_VERSION: int = 1
