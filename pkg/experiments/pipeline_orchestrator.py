"""
Experiment Pipeline Orchestrator

Runs one experiment command end to end: cache lookup, computation on the
simulation core, CSV/JSON outputs, manifest and the ExperimentRun record.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from simulation.boundary import check_conditions, integral_test
from simulation.exceptions import FeasibilityError
from simulation.limit_process import (
    clock_distribution,
    default_q_edges,
    estimate_q_marginal,
    estimate_shifted_phi,
    finiteness_integral,
    q_dominant_factor,
    sample_transient_paths,
)
from simulation.renewal_ode import (
    estimate_residual,
    exponent_integral,
    predict_phi,
    solve_renewal,
)
from simulation.repulsion import (
    WFunction,
    WKind,
    default_log_h_grid,
    envelope_criterion,
    mc_repulsion_check,
)
from simulation.stable_subordinator import K, write_path_dump
from simulation.survival_mc import (
    EstimationMethod,
    build_survival_curve,
    default_grid,
    estimate_big_jump_ratio,
    estimate_bracket_refinement,
)

from .experiment_config import ExperimentConfig
from .results_storage import ExperimentResultsStorage

logger = logging.getLogger(__name__)


def _json_safe(value):
    """NaN and infinities as None (SQLite rejects them in JSON columns)"""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class PipelineResult:
    """Outcome of one command run"""
    config_hash: str
    output_dir: str
    cached: bool
    summary: Dict
    manifest: Dict
    wall_clock_seconds: float = 0.0
    path_count: int = 0
    files: List[str] = field(default_factory=list)


class ExperimentPipeline:
    """
    End-to-end experiment run.

    Steps:
    1. Hash the canonical config
    2. Return the cached manifest when <out>/<hash>/ holds a valid one
    3. Build the boundary
    4. Run the command on the simulation core
    5. Write CSV/JSON outputs and the manifest
    6. Record an ExperimentRun row
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.storage = ExperimentResultsStorage(str(config.output_dir), config.config_hash)
        self.path_count = 0
        self.runners: Dict[str, Callable] = {
            'classify': self.run_classify,
            'survival': self.run_survival,
            'asymptotics': self.run_asymptotics,
            'envelope': self.run_envelope,
            'sample_path': self.run_sample_path,
            'q_marginal': self.run_q_marginal,
        }

    def run(self) -> PipelineResult:
        config = self.config
        logger.info("=" * 60)
        logger.info(f"EXPERIMENT {config.command.upper()} {config.config_hash[:12]}")
        logger.info("=" * 60)

        if config.use_cache:
            manifest = self.storage.cached_manifest()
            if manifest is not None:
                logger.info(f"✓ Cache hit in {self.storage.run_dir}, nothing recomputed")
                result = PipelineResult(
                    config_hash=config.config_hash,
                    output_dir=str(self.storage.run_dir),
                    cached=True,
                    summary=manifest.get('summary', {}),
                    manifest=manifest,
                    files=[entry['path'] for entry in manifest.get('files', [])],
                )
                self._record(result, status='CACHED')
                return result

        self.storage.reset()
        started = time.perf_counter()
        try:
            boundary = config.build_boundary()
            summary = self.runners[config.command](boundary, config.params)
        except Exception as e:
            logger.error(f"✗ {config.command} failed: {e}")
            self._record(None, status='FAILED', error=str(e))
            raise
        elapsed = time.perf_counter() - started

        manifest = self.storage.write_manifest(
            config.to_dict(), elapsed, self.path_count, summary=summary
        )
        result = PipelineResult(
            config_hash=config.config_hash,
            output_dir=str(self.storage.run_dir),
            cached=False,
            summary=summary,
            manifest=manifest,
            wall_clock_seconds=elapsed,
            path_count=self.path_count,
            files=[entry['path'] for entry in manifest['files']],
        )
        logger.info(f"✓ {config.command} done in {elapsed:.1f}s ({self.path_count} paths)")
        self._record(result, status='COMPLETED')
        return result

    def _record(self, result: Optional[PipelineResult], status: str, error: str = '') -> None:
        """ExperimentRun row; database problems never fail the run"""
        try:
            from .models import ExperimentRun

            ExperimentRun.objects.create(
                config_hash=self.config.config_hash,
                command=self.config.command,
                status=status,
                wall_clock_seconds=result.wall_clock_seconds if result else 0.0,
                path_count=result.path_count if result else self.path_count,
                seed=self.config.seed,
                output_dir=result.output_dir if result else str(self.storage.run_dir),
                config=self.config.to_dict(),
                manifest=_json_safe(result.manifest) if result else {},
                error=error,
            )
        except Exception as e:
            logger.warning(f"⚠ Could not record experiment run: {e}")

    # -- commands ----------------------------------------------------------

    def run_classify(self, boundary, params: Dict) -> Dict:
        test = integral_test(boundary, params['cutoffs'])
        conditions = check_conditions(
            boundary, horizon=params['condition_horizon'], epsilon=params['epsilon']
        )
        self.storage.save_frame(pd.DataFrame({
            'cutoff': test.cutoffs,
            'I_f': test.i_f_partial,
            'J_g': test.j_g_partial,
            'E_f_tau1': test.e_f_partial,
        }), 'integral_test.csv')
        report = {
            'classification': test.classification.value,
            'heuristic': test.heuristic,
            'divergence_evidence': test.divergence_evidence,
            'boundary': boundary.to_dict(),
            'conditions': conditions.to_dict(),
        }
        self.storage.save_json(report, 'classify.json')
        return {'classification': test.classification.value, 'heuristic': test.heuristic}

    def run_survival(self, boundary, params: Dict) -> Dict:
        streams = self.config.streams()
        workers = self.config.workers
        n_paths = params['n_paths']
        curve = build_survival_curve(
            boundary, params['t_grid'], n_paths, streams.child('curve'), workers,
            grid_points=params['grid_points'], rare_event_policy=params['rare_event_policy'],
        )
        self.path_count += n_paths + n_paths * sum(
            e.method == EstimationMethod.ONE_JUMP for e in curve.estimates
        )
        self.storage.save_frame(curve.to_frame(), 'survival.csv')
        summary = {
            'Phi_hat': float(curve.phi_integral[-1]),
            'Phi_floor_ok': bool(np.all(curve.to_frame()['Phi_floor_ok'])),
            'horizon': curve.horizon,
        }

        t_last = float(params['t_grid'][-1])
        if params['refinement_levels']:
            grid = default_grid(boundary, t_last, params['grid_points'])
            estimates = estimate_bracket_refinement(
                boundary, t_last, grid, n_paths, streams.child('refinement'),
                levels=params['refinement_levels'], workers=workers,
            )
            self.path_count += n_paths
            self.storage.save_frame(pd.DataFrame([e.to_dict() for e in estimates]).drop(
                columns=['components']), 'refinement.csv')
            summary['refined_gap'] = estimates[-1].gap

        if params['big_jump']:
            rows = []
            for i, t in enumerate(params['t_grid']):
                try:
                    rows.append(estimate_big_jump_ratio(
                        boundary, t, None, n_paths, streams.child(f'big_jump/{i}'), workers
                    ).to_dict())
                except FeasibilityError as e:
                    logger.warning(f"⚠ Big-jump ratio skipped at t={t:g}: {e}")
                self.path_count += n_paths
            self.storage.save_frame(pd.DataFrame(rows), 'big_jump.csv')
        return summary

    def run_asymptotics(self, boundary, params: Dict) -> Dict:
        streams = self.config.streams()
        workers = self.config.workers
        n_paths = params['n_paths']
        t_grid = np.asarray(params['t_grid'], dtype=float)
        t0 = params['t0'] if params['t0'] is not None else max(2.0 * boundary.f0, 1.0)
        horizons = np.union1d([t0], t_grid)

        curve = build_survival_curve(
            boundary, horizons, n_paths, streams.child('curve'), workers,
            grid_points=params['grid_points'],
        )
        self.path_count += n_paths
        phi0 = float(curve.integral_at([t0])[0])
        solution = solve_renewal(boundary, t0, phi0, horizons)
        self.storage.save_frame(solution.to_frame(), 'renewal.csv')

        rows = []
        for i, estimate in enumerate(curve.estimates):
            t = estimate.t
            if t < t0:
                continue
            phi_integral = float(curve.phi_integral[i])
            root_g = math.sqrt(max(float(boundary.g(t)), 1.0))
            mc_prediction = 2.0 * K * phi_integral / root_g
            prediction = predict_phi(boundary, solution, t)
            growth = exponent_integral(boundary, t0, t) if t > t0 else 0.0
            row = {
                't': t,
                'phi_lower': estimate.lower,
                'phi_hat': estimate.point,
                'phi_upper': estimate.upper,
                'phi_stderr': estimate.stderr,
                'method': estimate.method.value,
                'Phi_hat': phi_integral,
                'mc_prediction': mc_prediction,
                'ode_prediction': prediction.value,
                'plateau_prediction': prediction.plateau if prediction.plateau is not None else math.nan,
                'ratio': estimate.point / mc_prediction if mc_prediction > 0 else math.nan,
                'log_growth_error': (
                    abs(math.log(phi_integral) - math.log(phi0) - growth) / growth
                    if growth > 0 and phi_integral > 0 else math.nan
                ),
            }
            if params['residual']:
                row.update(self._residual_columns(boundary, t, n_paths, streams, workers, params))
            rows.append(row)

        frame = pd.DataFrame(rows)
        self.storage.save_frame(frame, 'asymptotics.csv')
        last = rows[-1]
        return {'t0': t0, 'ratio_at_last_t': last['ratio'], 'last_t': last['t']}

    def _residual_columns(self, boundary, t, n_paths, streams, workers, params) -> Dict:
        names = ('H_hat', 'H_stderr', 'rho_hat', 'smallness', 'identity_gap', 'identity_se')
        if t < boundary.f0:
            return {name: math.nan for name in names}
        try:
            diagnostic = estimate_residual(
                boundary, t, n_paths, streams.child(f'residual/{t:g}'), workers,
                nodes=params['residual_nodes'],
            )
        except FeasibilityError as e:
            logger.warning(f"⚠ Residual skipped at t={t:g}: {e}")
            return {name: math.nan for name in names}
        finally:
            self.path_count += 2 * n_paths
        values = diagnostic.to_dict()
        return {name: values[name] for name in names}

    def run_envelope(self, boundary, params: Dict) -> Dict:
        w = WFunction(WKind(params['w_kind']), params['w_parameter'])
        verdict = envelope_criterion(boundary, w, default_log_h_grid(params['log_h_points']))
        self.storage.save_frame(verdict.to_frame(), 'envelope.csv')
        report = verdict.to_dict()
        report['agrees'] = verdict.agrees

        if params['mc_check']:
            streams = self.config.streams()
            rows = []
            for h in params['mc_h']:
                estimate = mc_repulsion_check(
                    boundary, w, h, params['n_paths'], streams.child(f'mc/{h:g}'),
                    self.config.workers, t_prelimit=params['t_prelimit'],
                )
                self.path_count += 2 * params['n_paths']
                rows.append(estimate.to_dict())
            self.storage.save_frame(pd.DataFrame(rows), 'repulsion_mc.csv')
            report['mc_check'] = rows

        self.storage.save_json(report, 'envelope.json')
        return {'verdict': verdict.verdict.value, 'limit': verdict.limit, 'agrees': verdict.agrees}

    def run_sample_path(self, boundary, params: Dict) -> Dict:
        streams = self.config.streams()
        workers = self.config.workers
        horizon = params['curve_horizon']
        points = params['curve_points']
        curve = build_survival_curve(
            boundary, np.linspace(horizon / points, horizon, points), params['n_paths'],
            streams.child('curve'), workers, rare_event_policy=False,
        )
        self.path_count += params['n_paths']
        clock_horizon = math.inf if params['clock_horizon'] == 'inf' else float(params['clock_horizon'])
        clock = clock_distribution(
            boundary, curve, clock_horizon, max_tail_fraction=params['max_tail_fraction']
        )
        self.storage.save_frame(clock.to_frame(), 'clock.csv')

        samples = sample_transient_paths(
            boundary, clock, params['n_samples'], streams.child('paths'), workers,
            dt=params['dt'], tail_duration=params['tail_duration'],
            max_attempts=params['max_attempts'],
        )
        rows = []
        for k, sample in enumerate(samples):
            self.storage.save_frame(sample.as_frame(), f'path_{k:03d}.csv')
            if params['dump_skeletons']:
                target = self.storage.register_file(f'skeleton_{k:03d}.bin')
                write_path_dump(sample.skeleton, target, seed=self.config.seed)
            series = sample.as_series()
            row = sample.to_dict()
            row['points'] = int(series.size)
            row['max_abs_value'] = float(series.abs().max())
            row['constraint_satisfied'] = sample.constraint_satisfied(boundary)
            row['bessel_min_after_one'] = float(
                np.min(sample.bessel_values[sample.bessel_times >= 1.0], initial=math.inf)
            )
            rows.append(row)
            self.path_count += sample.attempts
        self.storage.save_frame(pd.DataFrame(rows), 'samples.csv')
        return {
            'clock_total': clock.total,
            'clock_tail_fraction': clock.tail_fraction,
            'samples': len(samples),
            'all_constraints_satisfied': all(r['constraint_satisfied'] for r in rows),
        }

    def run_q_marginal(self, boundary, params: Dict) -> Dict:
        streams = self.config.streams()
        workers = self.config.workers
        h = params['h']
        n_paths = params['n_paths']
        edges = params['y_edges'] or default_q_edges(boundary, h, params['bins'])
        estimate = estimate_q_marginal(
            boundary, h, edges, n_paths, streams.child('q'), workers,
            t_prelimit=params['t_prelimit'], tv_tolerance=params['tv_tolerance'],
            max_doublings=params['max_doublings'],
        )
        self.path_count += n_paths * (2 + len(estimate.tv_history))
        self.storage.save_frame(estimate.to_frame(), 'q_marginal.csv')
        report = estimate.to_dict()

        if params['dominant_y']:
            curve = build_survival_curve(boundary, [1.0], n_paths, streams.child('phi_one'), workers)
            phi_one = float(curve.phi_integral[-1])
            self.path_count += n_paths
            rows = []
            for y in params['dominant_y']:
                bound = finiteness_integral(boundary, h, y)
                phi_shifted, phi_shifted_se = estimate_shifted_phi(
                    boundary, h, y, bound.start, n_paths, streams.child(f'shifted/{y:g}'), workers
                )
                self.path_count += n_paths
                factor = q_dominant_factor(boundary, h, y, phi_one, phi_shifted)
                row = factor.to_dict()
                row.update({
                    'phi_shifted_stderr': phi_shifted_se,
                    'upper_value': bound.upper_value,
                    'bound': bound.bound,
                })
                rows.append(row)
            self.storage.save_frame(pd.DataFrame(rows), 'q_dominant.csv')

        self.storage.save_json(report, 'q_marginal.json')
        return {'survivors': estimate.survivors, 'tail_ratio': estimate.tail_ratio,
                't_prelimit': estimate.t_prelimit}
