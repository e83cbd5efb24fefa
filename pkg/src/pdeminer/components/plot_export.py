"""
Plot grids for a finished discovery run

Four t-x grids per run: the noisy data, U evaluated on the grid, the
absolute error between them and the PDE residual |D_t U - N(...)|. Written
as long-format CSV (t, x, value) for any plotting tool, optionally also as a
self-contained plotly page with the four heatmaps.
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from pdeminer.core.diff_engine import value_of
from pdeminer.core.rational_net import load_checkpoint, network_eval
from pdeminer.core.trainer import pde_residual
from pdeminer.dataset_manager import GridDataset, read_dataset

logger = logging.getLogger(__name__)

PANELS = {
    "noisy_data": "Noisy data",
    "learned_u": "Learned U",
    "abs_error": "|U - data|",
    "pde_residual": "PDE residual",
}


class PlotExporter:
    """Evaluates the trained networks of a run directory on its data grid"""

    def __init__(self, run_dir: Union[str, Path], chunk: int = 4096):
        self.run_dir = Path(run_dir)
        self.chunk = chunk
        for name in ("dataset.pdrd", "U.json", "N.json"):
            if not (self.run_dir / name).is_file():
                raise FileNotFoundError(f"{self.run_dir} is not a completed run: {name} is missing")
        self.dataset: GridDataset = read_dataset(self.run_dir / "dataset.pdrd")
        self.U = load_checkpoint(self.run_dir / "U.json")
        self.N = load_checkpoint(self.run_dir / "N.json")

    def compute_grids(self) -> Dict[str, np.ndarray]:
        t, x = self.dataset.coordinates()
        learned = np.empty(t.size)
        residual = np.empty(t.size)
        for start in range(0, t.size, self.chunk):
            rows = slice(start, start + self.chunk)
            learned[rows] = network_eval(self.U, [x[rows], t[rows]])
            residual[rows] = np.abs(value_of(pde_residual(self.U, self.N, t[rows], x[rows])))

        shape = self.dataset.shape
        learned = learned.reshape(shape)
        return {
            "noisy_data": self.dataset.values,
            "learned_u": learned,
            "abs_error": np.abs(learned - self.dataset.values),
            "pde_residual": residual.reshape(shape),
        }

    def export_csv(self, grids: Dict[str, np.ndarray]) -> List[Path]:
        t, x = self.dataset.coordinates()
        paths = []
        for name, grid in grids.items():
            path = self.run_dir / f"{name}.csv"
            pd.DataFrame({"t": t, "x": x, "value": grid.ravel()}).to_csv(path, index=False, float_format="%.17g")
            paths.append(path)
        return paths

    def export_html(self, grids: Dict[str, np.ndarray]) -> Path:
        fig = make_subplots(rows=2, cols=2, subplot_titles=list(PANELS.values()),
                            horizontal_spacing=0.12, vertical_spacing=0.12)
        for i, name in enumerate(PANELS):
            row, col = divmod(i, 2)
            fig.add_trace(go.Heatmap(
                z=grids[name].T, x=self.dataset.t_grid, y=self.dataset.x_grid, colorscale="Viridis",
                colorbar=dict(len=0.42, x=0.45 + 0.55 * col, y=0.79 - 0.58 * row),
            ), row=row + 1, col=col + 1)
            fig.update_xaxes(title_text="t", row=row + 1, col=col + 1)
            fig.update_yaxes(title_text="x", row=row + 1, col=col + 1)

        fig.update_layout(title=f"📊 {self.dataset.metadata.equation} run: {self.run_dir.name}", height=800)
        path = self.run_dir / "panels.html"
        fig.write_html(str(path))
        return path


def export_plots(run_dir: Union[str, Path], html: bool = False) -> List[Path]:
    """
    Helper for the CLI

    Usage:
        paths = export_plots("runs/heat_sine_desk", html=True)
    """
    exporter = PlotExporter(run_dir)
    grids = exporter.compute_grids()
    paths = exporter.export_csv(grids)
    if html:
        paths.append(exporter.export_html(grids))
    logger.info(f"Exported {len(paths)} plot files to {exporter.run_dir}")
    return paths
