"""
Method dispatch for one run configuration: a single method, or every
thermal method compared against the exact reference.
"""
from __future__ import annotations
import logging, os
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from src.config.enums import Method
from src.config.settings import get_config
from src.core.runner import EnsembleRunner
from src.models.run import RunConfig
from src.models.series import ComparisonResult, ObservableSeries
from src.services.boltzmann import run_boltzmann, run_ta
from src.services.davydov import run_d1
from src.services.exact import population_difference_qm
from src.services.observables import AGREEMENT_THRESHOLD, compare_series
from src.services.pfunction import run_pfunction_ensemble
from src.services.stochastic import run_stochastic_ensemble
from src.utils.formatters import Formatters, write_text

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    series: Dict[Method, ObservableSeries] = field(default_factory=dict)
    comparisons: List[ComparisonResult] = field(default_factory=list)
    paths: List[str] = field(default_factory=list)

    @property
    def warnings(self) -> List[str]:
        return [f"{m.value}: {w}" for m, s in self.series.items() for w in s.warnings]


class Simulation:
    """Runs the configured method(s) on a shared time grid and writes the results."""

    def __init__(self, config: RunConfig, runner: Optional[EnsembleRunner] = None):
        self.config = config
        self.runner = runner
        self.t_grid = config.t_grid()

    async def run_method(self, method: Method) -> ObservableSeries:
        series = await self._dispatch(method)
        if not series.is_accepted:
            series.flag("norm or P_z outside acceptance bounds")
        for message in series.warnings:
            logger.warning(f"{method.value}: {message}")
        return series

    async def _dispatch(self, method: Method) -> ObservableSeries:
        cfg = self.config
        params, integrator = cfg.params(), cfg.integrator()
        fp = cfg.fingerprint(method)
        logger.info(f"Running {method.display_name} ({method.value}) on {self.t_grid.size} samples")
        if method is Method.D1:
            return run_d1(params, integrator, self.t_grid, fingerprint=fp)
        thermal = cfg.thermal().escalated(params)
        if method is Method.EXACT:
            return population_difference_qm(cfg.beta, params, thermal, self.t_grid, fingerprint=fp)
        if method is Method.TA:
            return run_ta(cfg.beta, params, integrator, self.t_grid, fingerprint=fp)
        if method is Method.STOCHASTIC:
            return await run_stochastic_ensemble(cfg.realizations, cfg.seed, cfg.beta, params, thermal, integrator,
                                                 self.t_grid, runner=self.runner, fingerprint=fp)
        if method is Method.PFUNCTION:
            return await run_pfunction_ensemble(cfg.samples, cfg.seed, cfg.beta, params, integrator, self.t_grid,
                                                runner=self.runner, fingerprint=fp)
        if method is Method.BOLTZMANN:
            return await run_boltzmann(thermal.boltzmann_trunc_NT, cfg.beta, params, integrator, self.t_grid,
                                       g_phase=cfg.g_phase, runner=self.runner, fingerprint=fp)
        raise ValueError(f"{method.value} is not a single propagation method")

    async def compare_all(self) -> RunOutcome:
        """Every comparison method, each compared with the exact reference."""
        outcome = RunOutcome()
        for method in Method.comparison_set():
            outcome.series[method] = await self.run_method(method)
        reference = outcome.series[Method.EXACT]
        for method, series in outcome.series.items():
            if method is Method.EXACT:
                continue
            label = f"{method.value}-{self.config.mode.value}"
            outcome.comparisons.append(compare_series(reference, series, AGREEMENT_THRESHOLD, label=label))
        outcome.comparisons.sort(key=lambda r: (r.sup_norm, r.label))
        closest = outcome.comparisons[0]
        logger.info(f"Closest to exact: {closest.label} (sup-norm {closest.sup_norm:.3e})")
        return outcome

    async def execute(self) -> RunOutcome:
        """Run and serialize; single methods write one file, compare-all a directory."""
        cfg = self.config
        ext = cfg.format.extension
        if cfg.method is Method.COMPARE_ALL:
            outcome = await self.compare_all()
            directory = cfg.output or os.path.join(get_config().output_dir, "compare-all")
            for method, series in outcome.series.items():
                path = os.path.join(directory, f"{method.value}{ext}")
                outcome.paths.append(await write_text(path, Formatters.series(series, cfg.format)))
            summary = Formatters.summary(outcome.comparisons, cfg.format,
                                         metadata=cfg.fingerprint(Method.EXACT), threshold=AGREEMENT_THRESHOLD)
            outcome.paths.append(await write_text(os.path.join(directory, f"summary{ext}"), summary))
            return outcome
        series = await self.run_method(cfg.method)
        path = cfg.output or os.path.join(get_config().output_dir, f"{cfg.method.value}{ext}")
        if os.path.isdir(path):
            path = os.path.join(path, f"{cfg.method.value}{ext}")
        outcome = RunOutcome(series={cfg.method: series})
        outcome.paths.append(await write_text(path, Formatters.series(series, cfg.format)))
        return outcome
