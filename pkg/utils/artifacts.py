# utils/artifacts.py
import hashlib
import json
import logging
import platform
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pydantic  # noqa: E402
import scipy  # noqa: E402

from exceptions import ChoquardError  # noqa: E402
from models.grid import RadialFunction  # noqa: E402
from schema.report import RunSummary  # noqa: E402

logger = logging.getLogger("choquard")

plt.rcParams["font.size"] = 9
plt.rcParams["savefig.bbox"] = "tight"


def inputs_hash(config: Dict) -> str:
    """sha256 of the canonical JSON of the validated configuration"""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "pydantic": pydantic.VERSION,
    }


class RunDirectory:
    """One output directory per invocation; every file written is remembered for the summary"""

    def __init__(self, root: str, command: str, stamp: Optional[str] = None):
        stamp = stamp or datetime.now().strftime("%Y%m%d-%H%M%S")
        self.path = Path(root) / f"{command}-{stamp}"
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []

    def _target(self, name: str) -> Path:
        target = self.path / name
        self.files.append(str(target))
        return target

    # ✅ CSV
    def write_profile(self, name: str, u: RadialFunction) -> Path:
        """Two columns r,u with full double precision"""
        target = self._target(name)
        data = np.column_stack([u.grid.nodes, u.values])
        np.savetxt(target, data, delimiter=",", header="r,u", comments="", fmt="%.17g")
        return target

    def write_table(self, name: str, columns: Dict[str, Sequence]) -> Path:
        target = self._target(name)
        header = ",".join(columns)
        rows = np.column_stack([np.asarray(col, dtype=np.float64) for col in columns.values()])
        np.savetxt(target, rows, delimiter=",", header=header, comments="", fmt="%.17g")
        return target

    # ✅ JSON
    def write_json(self, name: str, payload: Dict) -> Path:
        target = self._target(name)
        target.write_text(json.dumps(payload, indent=2, default=_json_default), encoding="utf-8")
        return target

    def write_summary(self, summary: RunSummary) -> Path:
        target = self.path / "summary.json"
        summary.artifacts = list(self.files) + [str(target)]
        target.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"📊 summary written to {target}")
        return target

    def write_error(self, error: ChoquardError) -> Path:
        target = self._target("error.json")
        target.write_text(json.dumps(error.to_record(), indent=2, default=_json_default), encoding="utf-8")
        return target

    # ✅ SVG
    def plot_lines(self, name: str, series: Iterable[Dict], xlabel: str, ylabel: str,
                   title: str = "", logy: bool = False, hlines: Sequence[float] = ()) -> Path:
        """
        Line plot saved as SVG.

        Args:
            series: dicts with ``x``, ``y`` and optional ``label`` / ``style``
        """
        target = self._target(name)
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for s in series:
            ax.plot(s["x"], s["y"], s.get("style", "-"), label=s.get("label"), linewidth=1.2)
        for level in hlines:
            ax.axhline(level, color="grey", linestyle=":", linewidth=0.8)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
        if any(line.get_label() and not line.get_label().startswith("_") for line in ax.get_lines()):
            ax.legend(frameon=False)
        fig.savefig(target, format="svg")
        plt.close(fig)
        return target


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def plain(payload):
    """Round-trip through JSON so numpy scalars and arrays become builtins"""
    return json.loads(json.dumps(payload, default=_json_default))
