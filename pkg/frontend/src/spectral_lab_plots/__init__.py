"""Figures from spectral-lab experiment artifacts.

This package only ever touches the CSV tables and JSON sidecars that
``spectral-lab run`` writes; it performs no computation beyond re-running the
log-log / tail regressions on the tabulated points and cross-checking them
against the fits stored in the run metadata.
"""

from .figures import (
    KINDS,
    FigureSpec,
    FitMismatchError,
    MissingColumnsError,
    SchemaMismatchError,
    render,
)

__all__ = [
    "KINDS",
    "FigureSpec",
    "FitMismatchError",
    "MissingColumnsError",
    "SchemaMismatchError",
    "render",
]
