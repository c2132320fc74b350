"""Static figure rendering for experiment report bundles.

Consumes the harness output directory (report.json, manifest.json, CSV side
tables) and renders one figure per manifest entry.  Every number shown on a
figure is copied verbatim from the report; nothing is recomputed.
"""

__version__ = "0.1.0"

from .render import RenderedFigure, SchemaMismatchError, render_figures

__all__ = ["render_figures", "RenderedFigure", "SchemaMismatchError"]
