"""
Config-driven experiment runner.

Results land in ``<out>/<experiment>-<confighash12>/``: report.json, CSV
tables, failures.json when a verdict fails, and manifest.json written last
with a checksum for every other file.
"""

from __future__ import annotations

import logging
import math
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import optimize, special

from . import __version__
from .applications.adler import adler_conditioned_shape, adler_mode_check
from .applications.helicity import (
    curl_equation_audit,
    eigen_equation_audit,
    helicity_analytic,
    helicity_conditioned_structure,
    helicity_numeric_check,
    mode_field,
    origin_relations,
)
from .concentration import RECORD_COLUMNS, concentration_curve
from .config import ExperimentConfig
from .errors import OutputExistsError, RepeatedEigenvalueError, ResourceCapError
from .grid import build_grid
from .kernels import ScalarKernel, TurbulenceKernel
from .operators import (
    KernelCovariance,
    assemble_covariance,
    build_M,
    observable_helicity,
    observable_point_intensity,
    sqrt_psd,
)
from .sampling import (
    basis_from_operators,
    draw_conditional,
    tail_asymptotic,
    tail_density_cf,
    tail_model,
    tail_prob_cf,
    tail_prob_mc,
    tail_prob_residues,
)
from .settings import Settings
from .spectral import (
    check_prop3,
    eig_symmetric,
    lowrank_modes,
    random_covariance,
    random_observable,
    spectrum_CO_lowrank,
)
from .utils.io import canonical_hash, sha256_file, write_csv, write_json
from .utils.rng import stream_generator

logger = logging.getLogger(__name__)

LOWRANK_MATCH_TOL = 1e-9
MC_SIGMAS = 3.0
MC_MIN_PROBABILITY = 1e-3
RESIDUE_TOL = 1e-6
ASYMPTOTE_TARGET = 1e-4
ASYMPTOTE_BAND = (0.9, 1.1)
ADLER_MIN_SIMILARITY = 0.9
EIGEN_AUDIT_TOL = 1e-10
CURL_AUDIT_TOL = 1e-2
CURL_REFINEMENT_MIN = 3.0
PU_FINAL_MAX = 0.05


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: object = None
    tol: object = None


@dataclass
class ExperimentResult:
    """Report body, CSV tables (file name -> (columns, rows)) and verdicts."""

    report: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)

    def check(self, name, passed, value=None, tol=None):
        self.verdicts.append(Verdict(name, bool(passed), value, tol))

    @property
    def failures(self):
        return [verdict for verdict in self.verdicts if not verdict.passed]


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    config_hash: str
    code_version: str
    seed: int
    started: str
    finished: str
    directory: str
    files: list
    passed: bool
    failures: list


def _now():
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def _field_rows(grid, columns):
    """Rows (coordinates..., component, values...) for fields given as flat physical columns."""
    coords = grid.coordinates
    rows = []
    for flat in range(grid.size):
        component, node = divmod(flat, grid.n_nodes)
        rows.append((*coords[node], component, *columns[flat]))
    return rows


def _field_columns(grid, names):
    return [f"x{axis}" for axis in range(grid.d)] + ['component'] + list(names)


class ExperimentRunner:
    """
    Runs one validated ExperimentConfig and persists its artifacts.
    """

    def __init__(self, config: ExperimentConfig, settings=None, out=None, force=False, workers=None, echo=print):
        self.config = config
        self.settings = settings or Settings()
        self.workers = int(workers or self.settings.workers)
        self.root = Path(out or config.output_dir or self.settings.output_dir)
        self.force = force
        self.echo = echo
        self.config_hash = canonical_hash(config.as_dict())

    @property
    def run_dir(self):
        return self.root / f"{self.config.experiment}-{self.config_hash[:12]}"

    # builders shared by the grid-based experiments

    def _kernel(self):
        k = self.config.kernel
        if k.type == 'scalar':
            return ScalarKernel(k.family, k.length, k.variance)
        return TurbulenceKernel(k.energy, k.taylor_microscale, k.shape)

    def _grid(self):
        g = self.config.grid
        return build_grid(g.d, g.L, g.n, g.N)

    def _point(self, grid):
        point = self.config.observable.point
        return np.asarray(point, dtype=float) if point else np.zeros(grid.d)

    def _observable(self, grid):
        if self.config.observable.type == 'helicity':
            return observable_helicity(grid)
        return observable_point_intensity(grid, self._point(grid))

    def _covariance(self, grid, kernel):
        return assemble_covariance(grid, kernel, max_dim=self.settings.max_dense_dim)

    def _basis(self):
        grid = self._grid()
        kernel = self._kernel()
        C = self._covariance(grid, kernel)
        C_half = sqrt_psd(C)
        O = self._observable(grid)
        s = self.config.sampling
        basis = basis_from_operators(C, O, s.kind, rel_tol=s.rel_tol, C_half=C_half)
        return grid, kernel, C, C_half, O, basis

    def _thresholds(self, basis):
        s = self.config.sampling
        u = np.asarray(s.u_grid, dtype=float)
        if not s.u_relative:
            return u, 1.0
        model = basis.tail_model()
        scale = model.mean if model.mean > 0 else math.sqrt(model.second_moment)
        return u * scale, scale

    def _sampler_options(self):
        s = self.config.sampling
        return {'budget': s.budget, 'c': s.c, 'workers': self.workers}

    def _curve_checks(self, result, curve):
        result.check('pu_strictly_decreasing', curve.pu_strictly_decreasing)
        final = curve.records[-1].P_u
        result.check('pu_final_small', final <= PU_FINAL_MAX, final, PU_FINAL_MAX)
        result.check('phibar_small_non_increasing', curve.small_non_increasing)
        result.check('phibar_positive', curve.phibar_positive)

    # experiments

    def _prop3(self):
        p = self.config.prop3
        if p.dim > self.settings.max_dense_dim:
            raise ResourceCapError(f"prop3 dimension {p.dim} exceeds the dense cap {self.settings.max_dense_dim}")
        rng = stream_generator(self.config.seed, 0)
        result = ExperimentResult()
        rows, reports = [], []
        for instance in range(p.instances):
            deficient = instance % 2 == 1
            low_rank = (instance // 2) % 2 == 1
            C = random_covariance(rng, p.dim, p.deficient_rank if deficient else None)
            O = random_observable(rng, p.dim, p.observable_rank if low_rank else None)
            report = check_prop3(C, O, tol=p.tol)
            c_rank = p.deficient_rank if deficient else p.dim
            o_type = f"rank-{p.observable_rank}" if low_rank else 'dense'
            rows.append((instance, c_rank, o_type, report.route, report.k_nonzero, report.mismatch,
                         report.max_imag, report.passed, report.input_hash))
            reports.append(report)
        self.echo(f"  {sum(r.passed for r in reports)}/{len(reports)} instances agree within {p.tol:g}")

        worst = max(r.mismatch for r in reports)
        result.report = {'instances': reports, 'max_mismatch': worst}
        result.tables['prop3.csv'] = (
            ('instance', 'c_rank', 'observable', 'route', 'k_nonzero', 'mismatch', 'max_imag', 'passed', 'input_hash'),
            rows,
        )
        result.check('spectra_agree', all(r.passed for r in reports), worst, p.tol)
        return result

    def _spectrum(self):
        grid = self._grid()
        kernel = self._kernel()
        O = self._observable(grid)
        C = self._covariance(grid, kernel)
        rel_tol = self.config.sampling.rel_tol
        spectrum = eig_symmetric(build_M(C, O), rel_tol=rel_tol)
        dense = np.concatenate([spectrum.positive, spectrum.negative[::-1]])
        lowrank = spectrum_CO_lowrank(KernelCovariance(grid, kernel), O)

        if dense.size == lowrank.size and dense.size:
            mismatch = float(np.max(np.abs(dense - lowrank)) / np.max(np.abs(dense)))
        else:
            mismatch = float('inf') if dense.size != lowrank.size else 0.0
        self.echo(f"  {dense.size} nonzero eigenvalues, g = {spectrum.g}, low-rank mismatch {mismatch:.2e}")

        rows = [(k, 'M', value) for k, value in enumerate(dense)]
        rows += [(k, 'lowrank', value) for k, value in enumerate(lowrank)]
        result = ExperimentResult()
        result.report = {
            'spectrum': spectrum.summary(),
            'lowrank': lowrank,
            'lambda_one': float(spectrum.positive[0]) if spectrum.n_positive else None,
            'lambda_next': spectrum.lambda_next() if spectrum.n_positive else None,
            'mismatch': mismatch,
        }
        result.tables['spectrum.csv'] = (('index', 'route', 'eigenvalue'), rows)
        result.check('lowrank_matches_dense', mismatch <= LOWRANK_MATCH_TOL, mismatch, LOWRANK_MATCH_TOL)
        return result

    def _asymptote_threshold(self, model):
        def gap(u):
            return math.log(max(tail_asymptotic(model, u).probability, 1e-300)) - math.log(ASYMPTOTE_TARGET)

        high = model.lambda_one
        while gap(high) > 0:
            high *= 2.0
        return optimize.brentq(gap, 0.0, high) if gap(0.0) > 0 else 0.0

    def _exact_rank_one(self, model, u):
        lam = model.eigenvalues[0]
        if u <= 0:
            return 1.0
        if model.kind == 'complex':
            return math.exp(-u / lam)
        return float(special.erfc(math.sqrt(u / (2.0 * lam))))

    def _tails(self):
        t = self.config.tails
        seed = self.config.seed
        model = tail_model(t.eigenvalues, t.kind)
        u_grid = list(t.u_grid)
        u_star = t.asymptote_u if t.asymptote_u is not None else self._asymptote_threshold(model)

        result = ExperimentResult()
        rows = []
        mc_ok, residue_errors, exact_errors = True, [], []
        for k, u in enumerate(u_grid):
            cf = tail_prob_cf(model, u)
            asymptote = tail_asymptotic(model, u)
            residues = None
            if model.kind == 'complex':
                try:
                    residues = tail_prob_residues(model, u)
                    residue_errors.append(abs(residues - cf))
                except RepeatedEigenvalueError:
                    residues = None
            exact = self._exact_rank_one(model, u) if model.dim == 1 else None
            if exact is not None:
                exact_errors.append(abs(exact - cf))
            mc = tail_prob_mc(model, u, t.mc_samples, method=t.mc_method, seed=seed,
                              n_streams=4, workers=self.workers)
            # each u reuses the same streams; the comparisons are per-u
            z = (mc.estimate - cf) / mc.stderr if mc.stderr > 0 else 0.0
            if cf >= MC_MIN_PROBABILITY and abs(z) > MC_SIGMAS:
                mc_ok = False
            ratio = asymptote.probability / cf if cf > 0 else float('nan')
            rows.append((u, cf, asymptote.probability, ratio, residues, exact, mc.estimate, mc.stderr, z, mc.method))
            self.echo(f"  u = {u:g}: P = {cf:.6g}, asymptote ratio {ratio:.4g}, MC z = {z:+.2f}")

        P_star = tail_prob_cf(model, u_star)
        asymptote_star = tail_asymptotic(model, u_star)
        ratio_star = asymptote_star.probability / P_star
        density_star = tail_density_cf(model, u_star)
        result.report = {
            'kind': model.kind,
            'eigenvalues': model.eigenvalues,
            'g1': model.g1,
            'mean': model.mean,
            'asymptote': {
                'u': u_star,
                'P_cf': P_star,
                'P_asymptotic': asymptote_star.probability,
                'ratio': ratio_star,
                'density_cf': density_star,
                'density_asymptotic': asymptote_star.density,
                'prefactor': asymptote_star.prefactor,
            },
            'mc_samples': t.mc_samples,
            'seed': seed,
        }
        result.tables['tails.csv'] = (
            ('u', 'P_cf', 'P_asymptotic', 'ratio', 'P_residues', 'P_exact', 'P_mc', 'mc_stderr', 'z', 'mc_method'),
            rows,
        )
        low, high = ASYMPTOTE_BAND
        result.check('asymptote_ratio', low <= ratio_star <= high, ratio_star, list(ASYMPTOTE_BAND))
        result.check('monte_carlo_within_3se', mc_ok, None, MC_SIGMAS)
        if residue_errors:
            worst = max(residue_errors)
            result.check('residues_match_cf', worst <= RESIDUE_TOL, worst, RESIDUE_TOL)
        if exact_errors:
            worst = max(exact_errors)
            result.check('exact_rank_one', worst <= RESIDUE_TOL, worst, RESIDUE_TOL)
        return result

    def _concentration(self):
        s = self.config.sampling
        grid, _, _, _, _, basis = self._basis()
        u_grid, scale = self._thresholds(basis)
        curve = concentration_curve(basis, u_grid, s.epsilon, s.a, s.n_samples, s.method, self.config.seed,
                                    mode=s.mode, n_streams=s.n_streams, **self._sampler_options())
        for record in curve.records:
            self.echo(f"  u = {record.u:.6g}: P_u = {record.P_u:.4g} [{record.CI_low:.4g}, {record.CI_high:.4g}]")

        result = ExperimentResult()
        result.report = {
            'g1': basis.g1,
            'lambda_one': basis.lambda_one,
            'lambda_next': basis.lambda_next,
            'u_scale': scale,
            'curve': curve,
        }
        result.tables['concentration.csv'] = (RECORD_COLUMNS, [record.row() for record in curve.records])
        self._curve_checks(result, curve)
        return result

    def _adler(self):
        s = self.config.sampling
        grid, kernel, C, C_half, O, basis = self._basis()
        point = self._point(grid)
        mode = adler_mode_check(grid, C, kernel, point, C_half=C_half)
        self.echo(f"  top eigenvalue {mode.eigenvalue_lowrank:.12g} (expected {mode.expected:.12g})")

        u_grid, scale = self._thresholds(basis)
        shape = adler_conditioned_shape(basis, grid, u_grid, s.n_samples, self.config.seed, s.method, s.epsilon, s.a,
                                        n_streams=s.n_streams, point=point, **self._sampler_options())
        for entry in shape.points:
            self.echo(f"  u = {entry.u:.6g}: mean similarity {entry.mean_similarity:.4f}, "
                      f"median ratio {entry.median_ratio:.4g} ({entry.method})")

        modes = lowrank_modes(C, O)
        column = np.ravel(C.matrix[:, grid.flat_index(0, grid.node_index(point))])
        top = modes.fields[:, 0]
        top = top * (np.dot(top, column) / np.dot(top, top))

        result = ExperimentResult()
        result.report = {'mode': mode, 'u_scale': scale, 'shape': shape}
        shape_rows = [(p.u, p.u_relative, p.mean_similarity, p.mean_ratio, p.median_ratio, p.P_u, p.n_eff, p.method)
                      for p in [shape.baseline, *shape.points]]
        result.tables['adler_shape.csv'] = (
            ('u', 'u_relative', 'mean_similarity', 'mean_ratio', 'median_ratio', 'P_u', 'n_eff', 'method'),
            shape_rows,
        )
        result.tables['concentration.csv'] = (RECORD_COLUMNS, [record.row() for record in shape.curve.records])
        result.tables['adler_mode.csv'] = (
            _field_columns(grid, ['covariance_column', 'top_mode']),
            _field_rows(grid, np.stack([grid.from_normalized(column), grid.from_normalized(top)], axis=1)),
        )

        result.check('eigenvalue_is_C00', mode.eigenvalue_error <= mode.tol, mode.eigenvalue_error, mode.tol)
        cosine = min(mode.cosine_lowrank, mode.cosine_M)
        result.check('mode_is_covariance_column', cosine >= 1.0 - mode.tol, cosine, 1.0 - mode.tol)
        result.check('rank_one', mode.max_other <= mode.tol * mode.expected, mode.max_other, mode.tol * mode.expected)
        result.check('similarity_increasing', shape.similarity_increasing)
        final = shape.points[-1].mean_similarity
        result.check('final_similarity', final >= ADLER_MIN_SIMILARITY, final, ADLER_MIN_SIMILARITY)
        result.check('median_ratio_decreasing', shape.ratio_median_decreasing)
        self._curve_checks(result, shape.curve)
        return result

    def _helicity(self):
        h = self.config.helicity
        kernel = self._kernel()
        lam = kernel.taylor_microscale
        L = self.config.grid.L if self.config.grid is not None else 4.0 * lam
        result = ExperimentResult()

        reports, rows = [], []
        for n in h.refinement_n:
            grid = build_grid(3, L, n, 3)
            report = helicity_numeric_check(grid, kernel, rel_tol=h.rel_tol)
            reports.append(report)
            for k, value in enumerate(report.eigenvalues):
                rows.append((n, grid.h, k, value, math.copysign(report.expected, value), report.relative_errors[k],
                             float(np.max(report.top_angles_deg)), float(np.max(report.bottom_angles_deg))))
            self.echo(f"  n = {n}: max relative error {report.max_relative_error:.3e}, "
                      f"g = {report.g_positive}+{report.g_negative}")
        finest = reports[-1]
        result.check('eigenvalue_error', finest.max_relative_error <= h.eigen_tol,
                     finest.max_relative_error, h.eigen_tol)
        ratios = [a.max_relative_error / b.max_relative_error for a, b in zip(reports, reports[1:])]
        band = (4.0 * (1.0 - h.ratio_band), 4.0 * (1.0 + h.ratio_band))
        if ratios:
            result.check('refinement_ratio', all(band[0] <= r <= band[1] for r in ratios), ratios, list(band))
        result.check('degeneracy_3_plus_3', finest.g_positive == [3] and finest.g_negative == [3],
                     [finest.g_positive, finest.g_negative], [[3], [3]])
        angle = float(max(np.max(finest.top_angles_deg), np.max(finest.bottom_angles_deg)))
        result.check('mode_span_angle', angle <= h.angle_tol, angle, h.angle_tol)

        # analytic mode audits
        rng = stream_generator(self.config.seed, 0)
        direction = np.array([1.0, 1.0, 1.0])
        mode = helicity_analytic(kernel.energy, lam, 1, direction)
        eigen = eigen_equation_audit(mode, rng.uniform(-2.0 * lam, 2.0 * lam, (h.audit_points, 3)))
        result.check('eigen_equation', eigen.relative_residual <= EIGEN_AUDIT_TOL,
                     eigen.relative_residual, EIGEN_AUDIT_TOL)

        coarse = build_grid(3, 2.0 * lam, h.audit_n, 3)
        fine = build_grid(3, 2.0 * lam, 2 * h.audit_n - 1, 3)
        curl_coarse = curl_equation_audit(coarse, mode, h.audit_points, self.config.seed)
        curl_fine = curl_equation_audit(fine, mode, h.audit_points, self.config.seed)
        result.check('curl_equation', curl_coarse.relative_residual <= CURL_AUDIT_TOL,
                     curl_coarse.relative_residual, CURL_AUDIT_TOL)
        gain = curl_coarse.relative_residual / curl_fine.relative_residual
        result.check('curl_equation_refinement', gain >= CURL_REFINEMENT_MIN, gain, CURL_REFINEMENT_MIN)

        relations = origin_relations(coarse, mode)
        origin_tol = 10.0 * (coarse.h / lam) ** 2
        result.check('origin_curl_relation', relations.curl_relation_error <= origin_tol,
                     relations.curl_relation_error, origin_tol)
        result.check('origin_helicity', relations.helicity_error <= origin_tol, relations.helicity_error, origin_tol)

        radii = np.linspace(0.01, 0.1, 10) * lam
        points = radii[:, None] * (np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5]))
        gap = np.linalg.norm(mode.u_bar(points) - mode.u_bar_small(points), axis=1)
        bound = 2.0 * (radii / lam) ** 3
        result.check('small_x_form', bool(np.all(gap <= bound)), float(np.max(gap / bound)), 1.0)

        conditioned = None
        if h.conditioned:
            grid = build_grid(3, h.coarse_L * lam, h.coarse_n, 3)
            s = self.config.sampling
            conditioned = helicity_conditioned_structure(
                grid, kernel, h.u_relative, n=h.n_samples, method=s.method, seed=self.config.seed,
                max_dim=self.settings.max_dense_dim, epsilon=s.epsilon, n_streams=s.n_streams,
                **self._sampler_options())
            for entry in conditioned.points:
                self.echo(f"  u = {entry.u_relative:g} rms: similarity {entry.mean_similarity:.4f}, "
                          f"ratio {entry.mean_ratio:.4g}")
            result.check('conditioned_similarity_increasing', conditioned.similarity_increasing)
            result.check('conditioned_ratio_decreasing', conditioned.ratio_decreasing)

        first = build_grid(3, L, h.refinement_n[0], 3)
        field_columns = mode_field(first, mode)
        result.report = {
            'expected': finest.expected,
            'refinement': reports,
            'ratios': ratios,
            'eigen_audit': eigen,
            'curl_audit': [curl_coarse, curl_fine],
            'origin': relations,
            'conditioned': conditioned,
        }
        result.tables['helicity_spectrum.csv'] = (
            ('n', 'h', 'index', 'eigenvalue', 'expected', 'relative_error', 'top_angle_deg', 'bottom_angle_deg'),
            rows,
        )
        result.tables['helicity_mode.csv'] = (
            _field_columns(first, ['v_bar']),
            _field_rows(first, field_columns[:, None]),
        )
        return result

    def _sample(self):
        s = self.config.sampling
        grid, _, _, _, _, basis = self._basis()
        u_grid, scale = self._thresholds(basis)
        u = float(u_grid[0])
        batch, summary = draw_conditional(basis, u, s.method, self.config.seed, target=s.n_samples,
                                          n_streams=s.n_streams, **self._sampler_options())
        self.echo(f"  {summary.accepted} samples at u = {u:.6g} ({summary.method}), ESS {summary.effective_size:.1f}")

        count = min(s.dump, len(batch))
        fields = grid.from_normalized(basis.fields(batch.t[:count])).T
        if basis.kind == 'complex':
            names = [f"{part}_{k}" for k in range(count) for part in ('re', 'im')]
            values = np.empty((grid.size, 2 * count))
            values[:, 0::2] = fields.real
            values[:, 1::2] = fields.imag
        else:
            names = [f"sample_{k}" for k in range(count)]
            values = np.real(fields)

        result = ExperimentResult()
        result.report = {
            'u': u,
            'u_scale': scale,
            'summary': summary,
            'Q_min': float(batch.Q.min()),
            'Q_mean': float(np.dot(batch.weights, batch.Q)),
            'weights': batch.weights[:count],
        }
        result.tables['samples.csv'] = (_field_columns(grid, names), _field_rows(grid, values))
        result.tables['sample_Q.csv'] = (
            ('index', 'Q', 'log_weight', 'stream'),
            [(k, batch.Q[k], batch.log_weights[k], batch.streams[k]) for k in range(len(batch))],
        )
        floor = 0.5 * s.n_samples
        result.check('effective_size', summary.effective_size >= floor, summary.effective_size, floor)
        return result

    EXPERIMENTS = {
        'prop3': _prop3,
        'spectrum': _spectrum,
        'tails': _tails,
        'concentration': _concentration,
        'adler': _adler,
        'helicity': _helicity,
        'sample': _sample,
    }

    def run(self):
        """
        Execute the experiment and write its artifacts; returns the RunManifest
        """
        run_dir = self.run_dir
        if run_dir.exists() and not self.force:
            raise OutputExistsError(f"{run_dir} already exists; pass --force to overwrite")

        started = _now()
        name = self.config.experiment
        self.echo(f"Running {name} (seed {self.config.seed}, config {self.config_hash[:12]})")
        result = self.EXPERIMENTS[name](self)
        finished = _now()

        if run_dir.exists():
            shutil.rmtree(run_dir)
        run_dir.mkdir(parents=True)

        verdicts = result.verdicts
        passed = all(v.passed for v in verdicts)
        written = [write_json(run_dir / 'report.json', {
            'experiment': name,
            'code_version': __version__,
            'seed': self.config.seed,
            'config_hash': self.config_hash,
            'config': self.config.as_dict(),
            'passed': passed,
            'verdicts': verdicts,
            'results': result.report,
        })]
        for filename, (columns, rows) in result.tables.items():
            written.append(write_csv(run_dir / filename, columns, rows))
        if result.failures:
            written.append(write_json(run_dir / 'failures.json', {
                'experiment': name,
                'seed': self.config.seed,
                'failures': result.failures,
            }))

        manifest = RunManifest(
            experiment=name,
            config_hash=self.config_hash,
            code_version=__version__,
            seed=self.config.seed,
            started=started,
            finished=finished,
            directory=str(run_dir),
            files=[{'name': path.name, 'sha256': sha256_file(path)} for path in written],
            passed=passed,
            failures=[v.name for v in result.failures],
        )
        write_json(run_dir / 'manifest.json', manifest)

        for verdict in verdicts:
            self.echo(f"  [{'PASS' if verdict.passed else 'FAIL'}] {verdict.name}")
        logger.info("wrote %d artifacts to %s", len(written) + 1, run_dir)
        return manifest


def run_experiment(config, **kwargs):
    """Run ``config`` with an ExperimentRunner and return its RunManifest."""
    return ExperimentRunner(config, **kwargs).run()
