"""
CLI commands and the registry they are dispatched from.
"""
from __future__ import annotations

import argparse
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from hybridqf.errors import CommandError, ConfigError, HybridError, InformationFlowInconsistency
from hybridqf.generator import (
    GeneratorParams,
    InformationFlowReport,
    PositivityReport,
    StructureFlags,
    check_no_information_flow,
    classify,
    validate_positivity,
)
from hybridqf.io import Provenance, read_charfn_grid, write_charfn_grid, write_json, write_table, write_wigner_grid
from hybridqf.levy import LevyReport, validate_levy
from hybridqf.schemas import CorrelateConfig, LoadedConfig
from hybridqf.semigroup import (
    CharFn,
    NoiseFunctionEvaluator,
    QuadratureRule,
    evolve_charfn,
    gaussian_trajectory,
    multi_time_charfn,
    stationary_residual,
)
from hybridqf.settings import Settings
from hybridqf.states import (
    MAX_GRID_DIM,
    CharFnGrid,
    GridSpec,
    HybridGaussianState,
    twisted_sample,
    wigner_from_charfn,
)
from hybridqf.stochastic_oracle import (
    ClassicalSDEModel,
    TrajectoryEnsemble,
    empirical_charfn,
    gaussian_sampler,
    simulate_classical,
    simulate_hybrid_gaussian,
    summarize,
)

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    loaded: LoadedConfig
    args: argparse.Namespace
    settings: Settings
    out_dir: Path
    provenance: Provenance

    @property
    def tol(self) -> float:
        if self.args.tol is not None:
            return self.args.tol
        return self.loaded.model.run.tol or self.settings.positivity_tol

    @property
    def seed(self) -> int:
        return self.args.seed if self.args.seed is not None else self.loaded.model.run.seed

    @property
    def times(self) -> List[float]:
        return self.args.times if self.args.times is not None else list(self.loaded.model.run.times)

    def header(self, **extra: object) -> Dict[str, object]:
        return self.provenance.header(**extra)

    def grid_spec(self) -> Optional[GridSpec]:
        if self.args.grid is not None:
            return parse_grid(self.args.grid, self.loaded.model.dims.d)
        grid = self.loaded.model.run.grid
        return grid.to_spec() if grid is not None else None

    def evaluator(self, params: GeneratorParams) -> NoiseFunctionEvaluator:
        quadrature = self.loaded.model.run.quadrature
        defaults = QuadratureRule.from_settings(self.settings)
        rule = QuadratureRule(
            order=quadrature.order or defaults.order,
            tol=quadrature.tol or defaults.tol,
            max_depth=quadrature.max_depth or defaults.max_depth,
        )
        return NoiseFunctionEvaluator(params, rule)


def parse_times(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse times {text!r}", "--times") from exc


def parse_grid(text: str, d: int) -> GridSpec:
    """``L:N`` for a uniform grid or ``L1,...,Ld:N1,...,Nd`` per axis."""

    try:
        extents_text, points_text = text.split(":")
        extents = [float(part) for part in extents_text.split(",")]
        points = [int(part) for part in points_text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}; expected L:N or L1,..,Ld:N1,..,Nd", "--grid") from exc
    if len(extents) == 1:
        extents = extents * d
    if len(points) == 1:
        points = points * d
    if len(extents) != d or len(points) != d:
        raise ConfigError(f"grid needs {d} extents and {d} point counts", "--grid")
    try:
        return GridSpec(extents=tuple(extents), points=tuple(points))
    except HybridError as exc:
        raise ConfigError(str(exc), "--grid") from exc


class Command(ABC):
    """A named CLI command; returns the process exit code."""

    name: str
    help: str

    def configure(self, parser: argparse.ArgumentParser) -> None:
        """Add command-specific arguments."""

    @abstractmethod
    def run(self, context: CommandContext) -> int:
        """Execute the command."""


class CommandRegistry:
    """Registry for available commands."""

    def __init__(self) -> None:
        self._commands: Dict[str, Command] = {}

    def register(self, command: Command) -> None:
        logger.debug("Registering command", extra={"command": command.name})
        self._commands[command.name] = command

    def get(self, name: str) -> Command:
        try:
            return self._commands[name]
        except KeyError as exc:
            raise CommandError(f"Unknown command '{name}'") from exc

    def list(self) -> Dict[str, Command]:
        return dict(self._commands)


class ValidityCertificate(BaseModel):
    config: str
    config_sha256: str
    version: str
    valid: bool
    tol: float
    levy: Optional[LevyReport] = None
    positivity: Optional[PositivityReport] = None
    structure: Optional[StructureFlags] = None
    information_flow: Optional[InformationFlowReport] = None
    growth_rate: Optional[float] = None
    stable: Optional[bool] = None
    errors: List[str] = []


def certify(params: GeneratorParams, tol: float) -> Tuple[LevyReport, PositivityReport]:
    return validate_levy(params.nu), validate_positivity(params, tol)


def build_model(context: CommandContext) -> GeneratorParams:
    """Parameters of the configured model; refuses invalid models unless ``--force``."""

    params = context.loaded.model.build_params()
    levy, positivity = certify(params, context.tol)
    if not (levy.valid and positivity.valid):
        if not context.args.force:
            raise CommandError("model is invalid (run 'validate' for the certificate) or pass --force")
        logger.warning("Running on an invalid model because --force was given")
    return params


def initial_charfn(context: CommandContext) -> Tuple[CharFn, Optional[HybridGaussianState]]:
    model = context.loaded.model
    if model.initial_state is None:
        raise CommandError("this command needs an initial_state in the config")
    state = model.build_gaussian_state()
    if state is not None:
        if not state.is_admissible(context.tol):
            logger.warning("Initial covariance violates cov + iσ/2 ≥ 0", extra={"min_eig": state.quantum_min_eigenvalue()})
        return state.charfn, state
    try:
        grid = read_charfn_grid(model.initial_state.charfn_grid)
    except OSError as exc:
        raise ConfigError(f"cannot read grid: {exc.strerror}", "initial_state.charfn_grid") from exc
    if grid.spec.d != model.dims.d:
        raise ConfigError(f"grid has dimension {grid.spec.d}, model has {model.dims.d}", "initial_state.charfn_grid")
    return grid.interpolator(), None


class ValidateCommand(Command):
    name = "validate"
    help = "Certify complete positivity and the Lévy measure; exit 0 iff the model is valid."

    def run(self, context: CommandContext) -> int:
        model = context.loaded.model
        certificate = ValidityCertificate(
            config=str(context.loaded.path),
            config_sha256=context.loaded.sha256,
            version=context.provenance.version,
            valid=False,
            tol=context.tol,
        )
        try:
            params = model.build_params()
        except HybridError as exc:
            certificate.errors.append(str(exc))
            self._write(context, certificate)
            return 1

        levy, positivity = certify(params, context.tol)
        certificate.levy = levy
        certificate.positivity = positivity
        certificate.structure = classify(params)
        certificate.growth_rate = params.growth_rate()
        certificate.stable = params.is_stable()
        if positivity.valid:
            try:
                certificate.information_flow = check_no_information_flow(params, context.tol)
            except InformationFlowInconsistency as exc:
                certificate.errors.append(str(exc))
        if positivity.violation is not None:
            certificate.errors.append(
                f"{positivity.violation.form} has eigenvalue {positivity.violation.eigenvalue:.6e} < -{context.tol:g}"
            )
        certificate.errors.extend(f"atom {v.index}: {v.reason}" for v in levy.violations)
        certificate.valid = levy.valid and positivity.valid and not certificate.errors
        self._write(context, certificate)
        return 0 if certificate.valid else 1

    @staticmethod
    def _write(context: CommandContext, certificate: ValidityCertificate) -> None:
        path = write_json(context.out_dir / "certificate.json", certificate)
        logger.info("Certificate written", extra={"output_path": str(path), "valid": certificate.valid})


class EvolveSummaryRow(BaseModel):
    t: float
    min_eig_twisted: Optional[float] = None
    stationary_residual: Optional[float] = None
    gaussian_exact: Optional[bool] = None


class EvolveSummary(BaseModel):
    config_sha256: str
    times: List[float]
    rows: List[EvolveSummaryRow]
    fixed_point_reached: Optional[bool] = None


def _moment_columns(d: int) -> List[str]:
    return ["t"] + [f"m_{i + 1}" for i in range(d)] + [f"v_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]


def evolved_grids(
    context: CommandContext, params: GeneratorParams, chi0: CharFn, spec: GridSpec, times: Sequence[float]
) -> List[CharFnGrid]:
    evaluator = context.evaluator(params)
    mesh = spec.mesh()
    return [CharFnGrid(spec=spec, values=evolve_charfn(evaluator, chi0, mesh, t)) for t in times]


class EvolveCommand(Command):
    name = "evolve"
    help = "Propagate the initial state: moments, sampled χ_t and optional grids."

    def run(self, context: CommandContext) -> int:
        params = build_model(context)
        chi0, state = initial_charfn(context)
        times = context.times
        d = params.dims.d
        sigma = params.sigma.matrix
        summary_rows = [EvolveSummaryRow(t=float(t)) for t in times]
        fixed_point = None

        if state is not None:
            trajectory = gaussian_trajectory(params, state.mean, state.cov, times, context.settings)
            data = np.array([np.concatenate([[p.t], p.mean, p.cov.ravel()]) for p in trajectory])
            write_table(context.out_dir / "moments.csv", _moment_columns(d), data, context.header())
            for row, propagated in zip(summary_rows, trajectory):
                row.min_eig_twisted = float(np.linalg.eigvalsh(propagated.cov + 0.5j * sigma)[0])
                row.stationary_residual = stationary_residual(params, propagated.cov)
                row.gaussian_exact = propagated.gaussian_exact
            fixed_point = summary_rows[-1].stationary_residual <= 1e-6 if summary_rows else None
            if fixed_point:
                logger.info("Covariance fixed point reached", extra={"t": summary_rows[-1].t})

        xi = self._sample_points(context, d)
        evaluator = context.evaluator(params)
        rows = []
        for t in times:
            values = evolve_charfn(evaluator, chi0, xi, t)
            rows.append(np.column_stack([np.full(xi.shape[0], t), xi, values.real, values.imag]))
        columns = ["t"] + [f"xi_{i + 1}" for i in range(d)] + ["re", "im"]
        write_table(context.out_dir / "charfn_samples.csv", columns, np.vstack(rows), context.header())

        spec = context.grid_spec()
        if spec is not None:
            grids = evolved_grids(context, params, chi0, spec, times)
            for index, (t, grid) in enumerate(zip(times, grids)):
                write_charfn_grid(context.out_dir / f"charfn_grid_t{index}.csv", grid, context.header(t=float(t)))
                if context.loaded.model.run.wigner:
                    if d > MAX_GRID_DIM:
                        logger.warning("Skipping Wigner grids above the dimension cap", extra={"d": d})
                        continue
                    write_wigner_grid(
                        context.out_dir / f"wigner_t{index}.csv", wigner_from_charfn(grid), context.header(t=float(t))
                    )

        summary = EvolveSummary(
            config_sha256=context.loaded.sha256,
            times=[float(t) for t in times],
            rows=summary_rows,
            fixed_point_reached=fixed_point,
        )
        write_json(context.out_dir / "evolve_summary.json", summary)
        return 0

    @staticmethod
    def _sample_points(context: CommandContext, d: int) -> np.ndarray:
        samples = context.loaded.model.run.xi_samples
        if samples is not None:
            return np.array(samples, dtype=float)
        settings = context.settings
        return twisted_sample(d, settings.twisted_sample_points, settings.twisted_sample_radius, context.seed)


class WignerCommand(Command):
    name = "wigner"
    help = "Wigner grids of the evolved state at each requested time (d ≤ 4)."

    def run(self, context: CommandContext) -> int:
        params = build_model(context)
        if params.dims.d > MAX_GRID_DIM:
            raise CommandError(f"Wigner grids are limited to d ≤ {MAX_GRID_DIM}")
        spec = context.grid_spec()
        if spec is None:
            raise CommandError("the wigner command needs --grid or run.grid")
        chi0, _ = initial_charfn(context)
        times = context.times
        for index, (t, grid) in enumerate(zip(times, evolved_grids(context, params, chi0, spec, times))):
            wigner = wigner_from_charfn(grid)
            path = write_wigner_grid(context.out_dir / f"wigner_t{index}.csv", wigner, context.header(t=float(t)))
            logger.info(
                "Wigner grid written",
                extra={"output_path": str(path), "t": float(t), "normalization": wigner.normalization()},
            )
        return 0


def _probe_arrays(probes: CorrelateConfig, times_override: Optional[List[float]], s: int) -> Tuple[List[float], np.ndarray]:
    times = times_override if times_override is not None else list(probes.times)
    kvecs = np.array(probes.kvecs, dtype=float)
    if kvecs.ndim != 3 or kvecs.shape[1:] != (len(times), s):
        raise ConfigError(
            f"kvecs must have shape (probes, {len(times)}, {s}), got {kvecs.shape}", "run.correlate.kvecs"
        )
    return times, kvecs


def _kvec_columns(m: int, s: int) -> List[str]:
    return [f"k_{j + 1}_{c + 1}" for j in range(m) for c in range(s)]


class CorrelateCommand(Command):
    name = "correlate"
    help = "Multi-time characteristic function of the classical component."

    def run(self, context: CommandContext) -> int:
        params = build_model(context)
        probes = context.loaded.model.run.correlate
        if probes is None:
            raise CommandError("the correlate command needs run.correlate")
        if params.dims.s == 0:
            raise CommandError("model has no classical component")
        times, kvecs = _probe_arrays(probes, context.args.times, params.dims.s)
        chi0, _ = initial_charfn(context)
        values = multi_time_charfn(context.evaluator(params), chi0, times, kvecs)
        n_probes, m, s = kvecs.shape
        data = np.column_stack(
            [np.tile(times, (n_probes, 1)), kvecs.reshape(n_probes, m * s), values.real, values.imag]
        )
        columns = [f"t_{j + 1}" for j in range(m)] + _kvec_columns(m, s) + ["re", "im"]
        write_table(context.out_dir / "correlate.csv", columns, data, context.header())
        return 0


class ProbeRow(BaseModel):
    probe: int
    empirical_re: float
    empirical_im: float
    stderr_re: float
    stderr_im: float
    analytic_re: float
    analytic_im: float
    deviation_se: float


class SampleCommand(Command):
    name = "sample"
    help = "Monte Carlo ensemble of the classical component with an analytic comparison."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--export-paths", type=int, default=1000, help="Paths written to trajectories.csv.")
        parser.add_argument("--workers", type=int, default=None, help="Threads for path blocks.")

    def run(self, context: CommandContext) -> int:
        params = build_model(context)
        sample = context.loaded.model.run.sample
        if sample is None:
            raise CommandError("the sample command needs run.sample")
        chi0, state = initial_charfn(context)
        if state is None:
            raise CommandError("the sample command needs a Gaussian initial state")
        dims = params.dims
        if dims.s == 0:
            raise CommandError("model has no classical component to sample")

        settings = context.settings
        dt = sample.dt or settings.default_dt_fraction * sample.horizon
        n_paths = sample.n_paths or settings.default_n_paths
        seed = context.seed
        record_times = sample.record_times
        ensemble = self._simulate(context, params, state, sample.horizon, dt, n_paths, seed, record_times, sample.scheme)

        write_table(
            context.out_dir / "trajectories.csv",
            ["path_id", "time"] + [f"x_{c + 1}" for c in range(dims.s)],
            ensemble.rows(context.args.export_paths),
            context.header(seed=seed, n_paths=n_paths, dt=dt),
        )
        summary = summarize(ensemble)
        write_json(context.out_dir / "sample_summary.json", summary)

        trajectory = gaussian_trajectory(params, state.mean, state.cov, ensemble.times, settings)
        classical = dims.classical_slice
        comparison = []
        for row in summary.rows:
            propagated = trajectory[int(np.argmin(np.abs(ensemble.times - row.time)))]
            index = classical.start + row.component
            mean, var = propagated.mean[index], propagated.cov[index, index]
            comparison.append(
                [
                    row.time,
                    row.component,
                    row.mean,
                    row.mean_se,
                    mean,
                    row.variance,
                    row.variance_se,
                    var,
                ]
            )
        write_table(
            context.out_dir / "comparison.csv",
            ["time", "component", "mean", "mean_se", "analytic_mean", "variance", "variance_se", "analytic_variance"],
            np.array(comparison),
            context.header(seed=seed, n_paths=n_paths, dt=dt),
        )

        if sample.probes is not None:
            times, kvecs = _probe_arrays(sample.probes, None, dims.s)
            analytic = multi_time_charfn(context.evaluator(params), chi0, times, kvecs)
            rows = []
            for index, (k, reference) in enumerate(zip(kvecs, np.atleast_1d(analytic))):
                estimate = empirical_charfn(ensemble, times, k)
                rows.append(
                    ProbeRow(
                        probe=index,
                        empirical_re=estimate.value.real,
                        empirical_im=estimate.value.imag,
                        stderr_re=estimate.stderr_real,
                        stderr_im=estimate.stderr_imag,
                        analytic_re=float(reference.real),
                        analytic_im=float(reference.imag),
                        deviation_se=estimate.deviation(complex(reference)),
                    )
                )
            columns = list(ProbeRow.model_fields)
            data = np.array([[getattr(row, column) for column in columns] for row in rows], dtype=float)
            write_table(context.out_dir / "probes.csv", columns, data, context.header(seed=seed, n_paths=n_paths))
        return 0

    @staticmethod
    def _simulate(
        context: CommandContext,
        params: GeneratorParams,
        state: HybridGaussianState,
        horizon: float,
        dt: float,
        n_paths: int,
        seed: int,
        record_times: Optional[List[float]],
        scheme: str,
    ) -> TrajectoryEnsemble:
        dims = params.dims
        workers = context.args.workers
        if params.nu.is_empty and dims.n > 0:
            return simulate_hybrid_gaussian(
                params, state, horizon, dt, n_paths, seed, record_times, scheme, context.settings, workers
            )
        model = ClassicalSDEModel.from_params(params)
        if model.has_quantum_feed:
            raise CommandError(
                "jumps together with a quantum→classical feed (Z¹⁰ ≠ 0) need a stochastic unraveling of the "
                "quantum state; only moment and characteristic-function comparisons cover this model"
            )
        classical = dims.classical_slice
        sampler = gaussian_sampler(state.mean[classical], state.cov[classical, classical])
        return simulate_classical(model, sampler, horizon, dt, n_paths, seed, record_times, context.settings, workers)


def default_registry() -> CommandRegistry:
    registry = CommandRegistry()
    for command in (ValidateCommand(), EvolveCommand(), CorrelateCommand(), SampleCommand(), WignerCommand()):
        registry.register(command)
    return registry


__all__ = [
    "Command",
    "CommandContext",
    "CommandRegistry",
    "ValidityCertificate",
    "EvolveSummary",
    "ProbeRow",
    "parse_times",
    "parse_grid",
    "default_registry",
]
