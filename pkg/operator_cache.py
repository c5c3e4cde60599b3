import logging
import os
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from config import settings
from exceptions import NumericalError
from functions.kernel import build_operator
from models.grid import RadialGrid
from models.kernel import ConvolutionOperator, KernelSpec

logger = logging.getLogger("choquard")


def resolve_cache_dir(cache_dir: Optional[str]) -> Optional[Path]:
    """CHOQUARD_CACHE wins over the configured directory; empty means memory only"""
    chosen = settings.CHOQUARD_CACHE or cache_dir
    return Path(chosen) if chosen else None


class OperatorStore:
    """
    Kernel operators keyed by (N, R_max, grade, kind, alpha).

    Operators live in memory for the lifetime of the store and, when a cache
    directory is set, as npz files whose header records the grid hash. A file
    written for a different grid with the same key is rebuilt, never reused.
    """

    def __init__(self, cache_dir: Optional[str] = None, workers: Optional[int] = None):
        self.root = resolve_cache_dir(cache_dir)
        self.workers = workers or settings.DEFAULT_WORKERS
        self._memory: Dict[Tuple, ConvolutionOperator] = {}
        self.hits = 0
        self.builds = 0

    @staticmethod
    def key(grid: RadialGrid, spec: KernelSpec) -> Tuple:
        alpha = None if spec.alpha is None else float(spec.alpha)
        return grid.n, float(grid.r_max), float(grid.grade), spec.kind, alpha

    def path_for(self, grid: RadialGrid, spec: KernelSpec) -> Optional[Path]:
        if self.root is None:
            return None
        n, r_max, grade, kind, alpha = self.key(grid, spec)
        tag = "none" if alpha is None else f"{alpha:.12g}"
        return self.root / f"{kind}_N{n}_R{r_max:.6g}_g{grade:.6g}_a{tag}.npz"

    def get(self, grid: RadialGrid, spec: KernelSpec) -> ConvolutionOperator:
        key = self.key(grid, spec) + (grid.hash,)
        cached = self._memory.get(key)
        if cached is not None:
            self.hits += 1
            return cached

        op = self._load(grid, spec)
        if op is None:
            op = build_operator(grid, spec, workers=self.workers)
            self.builds += 1
            self._save(op)
        else:
            self.hits += 1
        self._memory[key] = op
        return op

    def _load(self, grid: RadialGrid, spec: KernelSpec) -> Optional[ConvolutionOperator]:
        path = self.path_for(grid, spec)
        if path is None or not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                stored_hash = str(data["grid_hash"])
                averages = data["averages"]
                tolerance = float(data["tolerance"])
                gap = float(data["validation_error"])
        except (OSError, KeyError, ValueError) as exc:
            logger.warning(f"⚠️ unreadable operator cache {path.name}: {exc}")
            return None
        if stored_hash != grid.hash or averages.shape != (grid.n, grid.n):
            logger.warning(f"⚠️ operator cache {path.name} was written for another grid, rebuilding")
            return None
        if not np.all(np.isfinite(averages)):
            raise NumericalError("cached kernel table has non-finite entries", {"file": str(path)})
        logger.debug(f"🔁 loaded {spec.label()} operator from {path}")
        return ConvolutionOperator(grid=grid, spec=spec, averages=averages, tolerance=tolerance,
                                   validation_error=gap)

    def _save(self, op: ConvolutionOperator):
        path = self.path_for(op.grid, op.spec)
        if path is None:
            return
        try:
            os.makedirs(path.parent, exist_ok=True)
            np.savez(path, grid_hash=np.array(op.grid.hash), averages=op.averages,
                     tolerance=np.array(op.tolerance), validation_error=np.array(op.validation_error))
        except OSError as exc:
            logger.warning(f"⚠️ could not write operator cache {path}: {exc}")
