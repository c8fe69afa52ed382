"""Figure renderer for the directional-modulation simulator's CSV artifacts."""

__version__ = "0.1.0"

from .figures import (
    EmptyDataError,
    FigureSpec,
    Marker,
    MissingColumnError,
    PlotError,
    RaggedGridError,
    beammap_spec,
    ber_sweep_spec,
    heatmap_figure,
    lines_figure,
    plot_heatmap,
    plot_lines,
    rate_sweep_spec,
)
