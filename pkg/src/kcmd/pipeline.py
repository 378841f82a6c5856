"""End-to-end significance test, independence variant and backward elimination."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np
from threadpoolctl import ThreadpoolController

from .bootstrap import BootstrapRun, p_value_and_quantile, run_bootstrap
from .data import CategoricalColumn, Column, Dataset, ScalarColumn, VectorColumn, validate
from .errors import BandwidthError, ConfigError, KcmdError, StageError, ValidationError
from .kernels import (
    BandwidthSet,
    SmoothingKernel,
    characteristic_gram,
    order_for_dimension,
    smoothing_gram,
)
from .preprocessing import (
    ScalingReport,
    scale_covariates,
    sigma_c_quantile,
)
from .smoothing import modified_residuals, select_bandwidth
from .statistic import (
    StatisticValue,
    c_tilde,
    center_gram,
    d_matrix,
    independence_gram,
    kcmd_known,
    u_stat,
)

__all__ = [
    "TestConfig",
    "TestReport",
    "IndependenceReport",
    "EliminationStep",
    "EliminationResult",
    "resolve_bandwidths",
    "run_significance_test",
    "independence_test",
    "backward_eliminate",
]

_controller = None


def _single_threaded_blas():
    # dense products are pinned to one BLAS thread so results never depend
    # on the thread count; parallelism lives at the level of whole tests
    global _controller
    if _controller is None:
        _controller = ThreadpoolController()
    return _controller.limit(limits=1, user_api="blas")


@dataclass(frozen=True)
class TestConfig:
    """Tunables of one test.

    ``m_h=None`` means 1.1 below four continuous covariates and 1.0 from
    four on; ``nu=None`` picks the kernel order from the dimension.
    ``gcv_lower``/``gcv_upper`` are the multipliers ``M_l, M_u`` of the GCV
    search interval (defaults ``0.25 d_C`` and ``3 + d_C``).  ``h_base``
    chooses whether the statistic bandwidth scales the pilot bandwidth
    (``"h_tilde"``) or the raw GCV bandwidth (``"gcv"``).
    """

    __test__ = False

    alpha: float = 0.05
    p_sigma: float = 0.3
    m_h_tilde: float = 1.25
    m_h: float | None = None
    kappa_scale: float = 500.0
    n_boot: int = 1000
    seed: int = 0
    nu: int | None = None
    quantile: str = "type7"
    gcv_lower: float | None = None
    gcv_upper: float | None = None
    gcv_grid: int = 40
    h_base: str = "h_tilde"

    def __post_init__(self):
        problems = []
        for name in ("alpha", "p_sigma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                problems.append(f"{name} must lie in (0, 1), got {v}")
        for name in ("m_h_tilde", "m_h", "kappa_scale", "gcv_lower", "gcv_upper"):
            v = getattr(self, name)
            if v is not None and not (v >= 0 if name == "kappa_scale" else v > 0):
                problems.append(f"{name} must be positive, got {v}")
        if self.n_boot < 1:
            problems.append(f"n_boot must be >= 1, got {self.n_boot}")
        if self.gcv_grid < 1:
            problems.append(f"gcv_grid must be >= 1, got {self.gcv_grid}")
        if self.nu not in (None, 2, 4):
            problems.append(f"nu must be 2, 4 or auto, got {self.nu}")
        if self.quantile != "type7":
            problems.append(f"unsupported quantile convention {self.quantile!r}")
        if self.h_base not in ("h_tilde", "gcv"):
            problems.append(f"h_base must be 'h_tilde' or 'gcv', got {self.h_base!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            problems.append(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    n: int
    d_c: int
    d_d: int
    bandwidths: BandwidthSet
    sigma_c2: float
    statistic: StatisticValue
    bootstrap: BootstrapRun
    scaling: ScalingReport
    reject: bool
    switch_count: int
    config: TestConfig
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def p_value(self) -> float:
        return self.bootstrap.p_value

    @property
    def q_alpha(self) -> float:
        return self.bootstrap.q_alpha


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, stage, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except (KcmdError, ValueError, ArithmeticError, FloatingPointError) as exc:
            raise StageError(stage, exc) from exc
        finally:
            self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - t0


def resolve_bandwidths(dataset: Dataset, config: TestConfig) -> BandwidthSet:
    """GCV bandwidth, pilot ``h~ = M_h~ h_gcv`` and statistic
    ``h = M_h base n^{-1/(2 nu + d_C)}`` with ``kappa_n = kappa_scale log n``.

    Operates on ``dataset.x_cont`` as given (the test passes the
    component-scaled covariates).
    """
    n, d_c = dataset.n, dataset.d_c
    kappa = config.kappa_scale * math.log(n)
    if d_c == 0:
        return BandwidthSet(None, None, kappa, None, None, 0, discrete=True)
    nu = order_for_dimension(d_c) if config.nu is None else config.nu
    if d_c >= 2 * nu:
        raise BandwidthError(
            f"kernel order insufficient for this dimension: d_C={d_c}, nu={nu}")
    kernel = SmoothingKernel(nu)
    h_gcv = select_bandwidth(dataset, kernel, config.gcv_lower, config.gcv_upper,
                             config.gcv_grid)
    h_tilde = config.m_h_tilde * h_gcv
    m_h = config.m_h if config.m_h is not None else (1.1 if d_c < 4 else 1.0)
    base = h_tilde if config.h_base == "h_tilde" else h_gcv
    h = m_h * base * float(n) ** (-1.0 / (2 * nu + d_c))
    return BandwidthSet(h, h_tilde, kappa, h_gcv, nu, d_c)


def _kernel(bw: BandwidthSet):
    return SmoothingKernel(bw.nu if bw.nu else 2)


def run_significance_test(dataset: Dataset, config: TestConfig | None = None) -> TestReport:
    """Test whether ``E[Y | X, W] = E[Y | X]``.

    Stages: validation, scaling, bandwidth selection, smoothing (statistic
    Gram at ``h``, pilot at ``h~``, modified residuals), statistic and
    bootstrap.  Failures are re-raised as :class:`StageError` tagged with
    the stage name.  The result depends only on ``(dataset, config)``.
    """
    config = config or TestConfig()
    st = _Stages()
    with _single_threaded_blas():
        st.run("validate", validate, dataset)
        scaling, dist = st.run("scaling", scale_covariates, dataset)
        params = st.run("scaling", sigma_c_quantile, dist.dist2_z, config.p_sigma)
        scaled = replace(dataset, x_cont=scaling.scaled_x_cont(dataset))
        bw = st.run("bandwidth", resolve_bandwidths, scaled, config)
        kernel = _kernel(bw)
        K_h = st.run("smoothing", smoothing_gram, scaled, bw.h, kernel)
        K_ht = K_h if bw.discrete else st.run("smoothing", smoothing_gram, scaled,
                                              bw.h_tilde, kernel)
        mres = st.run("smoothing", modified_residuals, scaled, bw, kernel, K_h, K_ht)

        def _stat():
            C = characteristic_gram(dist.dist2_z, params)
            G = dataset.y.gram()
            return u_stat(C, K_h, G), d_matrix(C, K_h), mres.residuals.gram()

        stat, D, GE = st.run("statistic", _stat)

        def _boot():
            run = run_bootstrap(D, GE, config.n_boot, config.seed)
            return p_value_and_quantile(run, stat.n_u_n, config.alpha)

        boot = st.run("bootstrap", _boot)
    return TestReport(
        n=dataset.n, d_c=dataset.d_c, d_d=dataset.d_d, bandwidths=bw,
        sigma_c2=params.sigma_c2, statistic=stat, bootstrap=boot, scaling=scaling,
        reject=bool(stat.n_u_n > boot.q_alpha), switch_count=int(mres.switch_mask.sum()),
        config=config, timings=st.timings,
    )


@dataclass(frozen=True)
class IndependenceReport:
    n: int
    statistic: float
    sigma_x2: float
    sigma_w2: float
    bootstrap: BootstrapRun
    reject: bool

    @property
    def p_value(self):
        return self.bootstrap.p_value


def independence_test(dataset: Dataset, config: TestConfig | None = None) -> IndependenceReport:
    """Test when ``W`` is independent of ``X``: no regression estimate needed.

    The embedded responses ``c_X(X_i, .) (x) Y_i`` (Gram ``C_x * G``,
    double-centred) are tested for conditional mean independence of ``W``
    with the known-regression estimator; calibration uses the multiplier
    bootstrap with ``C~`` in place of ``D``.
    """
    config = config or TestConfig()
    st = _Stages()
    with _single_threaded_blas():
        st.run("validate", validate, dataset)
        _, dist = st.run("scaling", scale_covariates, dataset)
        px = st.run("scaling", sigma_c_quantile, dist.dist2_x, config.p_sigma)
        pw = st.run("scaling", sigma_c_quantile, dist.dist2_w, config.p_sigma)

        def _stat():
            C_x = characteristic_gram(dist.dist2_x, px)
            C_w = characteristic_gram(dist.dist2_w, pw)
            H = center_gram(independence_gram(C_x, dataset.y.gram()))
            return dataset.n * kcmd_known(C_w, H), c_tilde(C_w), H

        stat, Ct, H = st.run("statistic", _stat)

        def _boot():
            run = run_bootstrap(Ct, H, config.n_boot, config.seed)
            return p_value_and_quantile(run, stat, config.alpha)

        boot = st.run("bootstrap", _boot)
    return IndependenceReport(dataset.n, stat, px.sigma_c2, pw.sigma_c2, boot,
                              bool(stat > boot.q_alpha))


@dataclass(frozen=True)
class EliminationStep:
    step: int
    group: str
    p_value: float
    removed: bool


@dataclass(frozen=True)
class EliminationResult:
    trace: tuple
    remaining: tuple
    removed: tuple
    error: str | None = None


def _assemble(y, groups, x_names, w_name):
    x_cont, x_disc, labels = [], [], []
    for g in x_names:
        for col in groups[g]:
            if isinstance(col, CategoricalColumn):
                x_disc.append(col)
            elif isinstance(col, ScalarColumn):
                x_cont.append(col.values)
                labels.append(col.name)
            elif isinstance(col, VectorColumn):
                for j in range(col.values.shape[1]):
                    x_cont.append(col.values[:, j])
                    labels.append(f"{col.name}_{j + 1}")
            else:
                raise ValidationError(
                    f"group {g!r}: {col.kind} column {col.name!r} cannot act as a "
                    "conditioning covariate; supply scalar scores")
    x = np.column_stack(x_cont) if x_cont else np.zeros((len(y), 0))
    return Dataset(y, x, tuple(x_disc), tuple(groups[w_name]), tuple(labels))


def backward_eliminate(y, groups: dict, config: TestConfig | None = None,
                       alpha_step: float = 0.01) -> EliminationResult:
    """Backward elimination over named covariate groups.

    At each step every remaining group is tested as ``W`` against the
    others as ``X``.  The group with the largest p-value is removed when
    that p-value exceeds ``alpha_step`` (ties: first in declaration order).
    Stops when all p-values are at most ``alpha_step`` or one group is left.

    Parameters
    ----------
    y : Column or Dataset
        Response (taken from ``Dataset.y`` when a dataset is given).
    groups : dict
        Maps group name to a list of columns.  Scalar, vector and
        categorical columns may appear; only these can be conditioned on.
    """
    if isinstance(y, Dataset):
        y = y.y
    if not isinstance(y, Column):
        raise ValidationError("response must be a Column or Dataset")
    if len(groups) < 2:
        raise ValidationError("backward elimination needs at least two groups")
    config = config or TestConfig()
    remaining = list(groups)
    removed, trace = [], []
    step = 0
    while len(remaining) > 1:
        step += 1
        pvals = []
        for g in remaining:
            others = [o for o in remaining if o != g]
            try:
                report = run_significance_test(_assemble(y, groups, others, g), config)
            except KcmdError as exc:
                return EliminationResult(tuple(trace), tuple(remaining), tuple(removed),
                                         f"step {step}, group {g!r}: {exc}")
            pvals.append(report.p_value)
        best = int(np.argmax(pvals))
        drop = pvals[best] > alpha_step
        for i, g in enumerate(remaining):
            trace.append(EliminationStep(step, g, pvals[i], drop and i == best))
        if not drop:
            break
        removed.append(remaining.pop(best))
    return EliminationResult(tuple(trace), tuple(remaining), tuple(removed))
