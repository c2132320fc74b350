"""Numerical toolkit for detecting measure-zero Lipschitz images.

Core pieces: metric oracles and sampled maps (:mod:`gmt_rect.metric_core`),
content estimation and covering constructions (:mod:`gmt_rect.measure`),
local derivative fits and critical-set machinery (:mod:`gmt_rect.jets`), the
Heisenberg group (:mod:`gmt_rect.heisenberg`), general control metrics
(:mod:`gmt_rect.cc_spaces`) and the scripted experiment harness
(:mod:`gmt_rect.experiments`, CLI ``gmt-rect``).
"""

__version__ = "0.1.0"
