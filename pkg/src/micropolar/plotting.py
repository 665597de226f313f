"""Optional figure rendering of solution fields (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["render_fields"]


def render_fields(fields: dict, out_dir, dpi: int = 120) -> list:
    """Render scalar fields as filled contours and vector fields as speed maps.

    Parameters
    ----------
    fields : dict
        Name to ``ScalarField`` or ``VectorField``.
    out_dir : path
        Target directory; one ``<name>.png`` per field.

    Returns
    -------
    list of Path
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .fields import VectorField

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fld in fields.items():
        X, Y = fld.grid.mesh
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        if isinstance(fld, VectorField):
            cs = ax.contourf(X, Y, fld.magnitude(), levels=24, cmap="viridis")
            step = max(1, fld.grid.nx // 16)
            sl = (slice(None, None, step), slice(None, None, step))
            ax.quiver(X[sl], Y[sl], fld.vx[sl], fld.vy[sl], color="white", width=0.004)
            label = f"|{name}|"
        else:
            vals = fld.values
            levels = 24 if np.ptp(vals) > 0 else 1
            cs = ax.contourf(X, Y, vals, levels=levels, cmap="RdBu_r")
            label = name
        fig.colorbar(cs, ax=ax, label=label)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(name)
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written
