"""
workbench.py – run configuration, result store and the batch pipelines

Provides:
- RunConfig: Hamiltonian file, resonance, eps grid, mu list, precision and output settings
- ResultStore: atomic JSON/CSV writes under the output directory plus a content-hashed cache
- cli_check, cli_separatrix, cli_melnikov, cli_inner, cli_measure, cli_fit, cli_report:
  the operations behind the command-line subcommands
"""
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from types import SimpleNamespace

import pandas as pd
from mpmath import mp

from .asymptotics import (beta_mu_slope, fit_splitting, melnikov_verdict, predict,
                          prefactor_convergence, to_original_variables)
from .errors import ConfigError, FitError, PrecisionError, SplittingError
from .fourier import exact, to_mpf
from .inner_solver import (InnerDifference, InnerDomain, RForm, build_inner_model,
                           compute_difference, first_order_stokes_constant, solve_inner_manifolds)
from .manifold_lab import (MANIFOLD_ORDER, Method, PrecisionContext, StroboscopicMap,
                           compute_manifold, find_homoclinic_points, find_periodic_orbit,
                           gap_spectrum, lobe_area, periodic_orbit_bounds)
from .melnikov import MelnikovData, extrapolate_f0, melnikov_function
from .model_core import (ResonanceContext, check_hypotheses, hamiltonian_from_dict, read_config,
                         rescale_at_resonance)
from .separatrix_analysis import (action_T0, compute_separatrix, find_critical_points,
                                  locate_singularity)

logger = logging.getLogger(__name__)

# ---------- knobs ----------
GRID_START      = Fraction(2, 5)
GRID_RATIO      = Fraction(17, 20)
GRID_STOP       = Fraction(3, 25)
BASE_DIGITS     = 30
INNER_DIGITS    = 40
MAX_DIGITS      = 2000
SIG_DIGITS      = 25
CACHE_VERSION   = 1
CACHE_ENV       = "SPLITTING_CACHE"

SAMPLE_COLUMNS = ["epsilon", "mu", "digits", "area", "err_est", "method", "angle",
                  "runtime_s", "flagged"]
ORBIT_COLUMNS = ["epsilon", "mu", "digits", "x_p", "y_p", "dx_p", "dy_p", "rho_u", "det_minus_one",
                 "bound_constant", "homoclinic_points", "pair_spread", "gap_mode_fraction"]
MELNIKOV_COLUMNS = ["epsilon", "mu", "k", "re_Mk", "im_Mk", "f0_re", "f0_im", "area_mel"]


def fmt(value, digits=SIG_DIGITS) -> str:
    """Fixed-significance decimal text; identical inputs give identical strings."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, str)):
        return str(value)
    if isinstance(value, Fraction):
        value = to_mpf(value)
    if isinstance(value, mp.mpc) or isinstance(value, complex):
        return f"{fmt(mp.re(value), digits)}{'+' if mp.im(value) >= 0 else '-'}{fmt(abs(mp.im(value)), digits)}j"
    return mp.nstr(mp.mpf(value), digits, strip_zeros=False)


def mu_key(mu) -> str:
    """Text of mu shared by every result file, independent of the working precision."""
    with mp.workdps(SIG_DIGITS + 10):
        return fmt(exact(mu))


def _number(value, name):
    try:
        return exact(value)
    except SplittingError as exc:
        raise ConfigError(f"'{name}' is not a number: {value!r}") from exc


# ---------- run configuration ----------
def geometric_grid(start=GRID_START, ratio=GRID_RATIO, stop=GRID_STOP):
    start, ratio, stop = exact(start), exact(ratio), exact(stop)
    if not (0 < ratio < 1) or start <= 0 or stop <= 0 or stop > start:
        raise ConfigError("epsilon_grid needs 0 < stop <= start and 0 < ratio < 1",
                          {"start": start, "ratio": ratio, "stop": stop})
    grid, eps = [], start
    while eps >= stop:
        grid.append(eps)
        eps *= ratio
    return grid


def validate_grid(epsilons):
    if not epsilons:
        raise ConfigError("epsilon grid is empty")
    if any(e <= 0 for e in epsilons):
        raise ConfigError("epsilon values must be positive", {"epsilons": epsilons})
    if any(b >= a for a, b in zip(epsilons[:-1], epsilons[1:])):
        raise ConfigError("epsilon values must be strictly decreasing", {"epsilons": epsilons})
    return list(epsilons)


@dataclass
class RunConfig:
    spec: object
    n: int
    m: int
    epsilons: list
    mus: list = field(default_factory=lambda: [Fraction(1)])
    digits: int = None
    max_digits: int = MAX_DIGITS
    workers: int = 1
    out: str = "results"
    manifold_order: int = MANIFOLD_ORDER
    inner: dict = field(default_factory=dict)
    r_form: str = RForm.LEADING
    saddle_index: int = None
    record_timings: bool = False
    spectrum: bool = False
    resume: bool = False
    source: str = None

    @classmethod
    def from_file(cls, path, overrides=None) -> "RunConfig":
        """
        Hamiltonian data plus the [run] table.

        ``run.hamiltonian`` may point at a separate Hamiltonian file, resolved
        relative to ``path``. Non-None ``overrides`` (CLI flags) win over file values.
        """
        data = read_config(path)
        run = dict(data.get("run", {}))
        hamiltonian = data
        if "hamiltonian" in run:
            target = os.path.join(os.path.dirname(os.path.abspath(path)), run.pop("hamiltonian"))
            hamiltonian = read_config(target)
        run.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(hamiltonian, run, source=path)

    @classmethod
    def from_dict(cls, hamiltonian: dict, run: dict, source=None) -> "RunConfig":
        spec, (n, m) = hamiltonian_from_dict(hamiltonian)
        if "epsilons" in run:
            epsilons = [_number(e, "epsilons") for e in run["epsilons"]]
        else:
            grid = run.get("epsilon_grid", {})
            epsilons = geometric_grid(grid.get("start", GRID_START), grid.get("ratio", GRID_RATIO),
                                      grid.get("stop", GRID_STOP))
        mus = [_number(mu, "mus") for mu in run.get("mus", [1])]
        if not mus:
            raise ConfigError("mu list is empty")
        try:
            config = cls(
                spec=spec, n=n, m=m,
                epsilons=validate_grid(epsilons),
                mus=sorted(set(mus)),
                digits=None if run.get("digits") is None else int(run["digits"]),
                max_digits=int(run.get("max_digits", MAX_DIGITS)),
                workers=int(run.get("workers", 1)),
                out=str(run.get("out", "results")),
                manifold_order=int(run.get("manifold_order", MANIFOLD_ORDER)),
                inner=dict(run.get("inner", {})),
                r_form=str(run.get("r_form", RForm.LEADING)),
                saddle_index=None if run.get("saddle_index") is None else int(run["saddle_index"]),
                record_timings=bool(run.get("record_timings", False)),
                spectrum=bool(run.get("spectrum", False)),
                resume=bool(run.get("resume", False)),
                source=source,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SplittingError):
                raise
            raise ConfigError(f"malformed [run] settings: {exc}") from exc
        if config.workers < 1:
            raise ConfigError("workers must be at least 1", {"workers": config.workers})
        if config.r_form not in (RForm.LEADING, RForm.EXAMPLE):
            raise ConfigError(f"unknown r_form {config.r_form!r}")
        return config

    def context(self, epsilon=1, mu=1) -> ResonanceContext:
        """Resonance context at ``epsilon``; delta = 1 stands in when h02 <= 0."""
        if self.spec.h02 > 0:
            return ResonanceContext.from_epsilon(self.spec, self.n, self.m, to_mpf(exact(epsilon)), mu)
        return ResonanceContext(self.n, self.m, 1, 1, mu)

    def inner_domain(self) -> InnerDomain:
        settings = {}
        for key in ("height", "extent"):
            if self.inner.get(key) is not None:
                settings[key] = to_mpf(_number(self.inner[key], f"inner.{key}"))
        for key in ("harmonics", "order", "points"):
            if key in self.inner:
                settings[key] = int(self.inner[key])
        if "window" in self.inner:
            lo, hi = self.inner["window"]
            settings["window"] = (to_mpf(_number(lo, "inner.window")), to_mpf(_number(hi, "inner.window")))
        return InnerDomain(**settings)


# ---------- result store ----------
class ResultStore:
    """
    Output directory of one run.

    Every write goes to a temporary file in the target directory and is moved
    into place with os.replace, so readers never see a partial file.
    """

    def __init__(self, root, cache_root=None):
        self.root = root
        self.cache_root = cache_root or os.environ.get(CACHE_ENV) or os.path.join(root, "cache")
        os.makedirs(self.root, exist_ok=True)
        os.makedirs(self.cache_root, exist_ok=True)

    def path(self, name):
        return os.path.join(self.root, name)

    def exists(self, name) -> bool:
        return os.path.exists(self.path(name))

    @staticmethod
    def _atomic_write(target, text):
        directory = os.path.dirname(target) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(target))
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise

    def write_text(self, name, text):
        self._atomic_write(self.path(name), text)
        logger.debug("wrote %s", self.path(name))

    def write_json(self, name, payload):
        self.write_text(name, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def read_json(self, name):
        path = self.path(name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"result file not found: {path}")
        with open(path, "r") as f:
            return json.load(f)

    def write_csv(self, name, rows, columns):
        frame = pd.DataFrame([{c: row.get(c, "") for c in columns} for row in rows], columns=columns)
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator="\n")
        self.write_text(name, buf.getvalue())

    def read_csv(self, name):
        path = self.path(name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"result file not found: {path}")
        return pd.read_csv(path, dtype=str, keep_default_na=False).to_dict("records")

    # cache
    @staticmethod
    def cache_key(payload) -> str:
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _cache_path(self, key):
        return os.path.join(self.cache_root, f"{key}.json")

    def cached(self, key):
        path = self._cache_path(key)
        if not os.path.exists(path):
            return None
        with open(path, "r") as f:
            return json.load(f)

    def remember(self, key, payload):
        self._atomic_write(self._cache_path(key), json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _sorted_rows(rows):
    """eps descending, mu ascending, then method."""
    return sorted(rows, key=lambda r: (-mp.mpf(r["epsilon"]), mp.mpf(r["mu"]), str(r.get("method", "")),
                                       int(r.get("k", 0) or 0)))


# ---------- shared stages ----------
def _working_saddle(V, saddle_index=None):
    points = find_critical_points(V)
    if not points:
        raise ConfigError("potential has no non-degenerate maximum; run `check` for details")
    if saddle_index is None:
        return max(points, key=lambda p: p.energy)
    try:
        return points[saddle_index]
    except IndexError as exc:
        raise ConfigError(f"saddle_index {saddle_index} out of range ({len(points)} saddles)") from exc


def _prepare(config: RunConfig, epsilon=1, mu=1):
    """Rescaled system, saddle, separatrix and nearest singularity at the current precision."""
    system = rescale_at_resonance(config.spec, config.context(epsilon, mu))
    cp = _working_saddle(system.potential(), config.saddle_index)
    sep = compute_separatrix(cp)
    sing = locate_singularity(sep)
    return system, cp, sep, sing


def _required_digits(config: RunConfig, a, epsilon):
    if config.digits is not None:
        return config.digits
    return PrecisionContext.for_splitting(a, to_mpf(epsilon)).digits


def _feasible(config: RunConfig, a):
    """Grid points whose digit requirement fits under max_digits."""
    kept = []
    for eps in config.epsilons:
        needed = _required_digits(config, a, eps)
        if needed > config.max_digits:
            logger.warning("eps=%s needs %d digits (> max_digits=%d): skipped", fmt(eps, 8), needed,
                           config.max_digits)
            continue
        kept.append(eps)
    return kept


# ---------- check ----------
def cli_check(config: RunConfig, store: ResultStore):
    with mp.workdps(config.digits or BASE_DIGITS):
        report = check_hypotheses(config.spec, config.context(), saddle_index=config.saddle_index)
        payload = report.to_dict()
    payload["resonance"] = {"n": config.n, "m": config.m}
    store.write_json("hypotheses.json", payload)
    logger.info("hypotheses %s", "passed" if report.passed else "failed")
    return report, payload


# ---------- separatrix ----------
def cli_separatrix(config: RunConfig, store: ResultStore):
    with mp.workdps(config.digits or BASE_DIGITS):
        system, cp, sep, sing = _prepare(config)
        payload = {
            "saddle": {"x": fmt(cp.x_star), "energy": fmt(cp.energy), "lambda": fmt(cp.lam),
                       "topology": cp.topology},
            "span": fmt(sep.span),
            "energy_error": fmt(sep.energy_error()),
            "action_total": fmt(action_T0(sep, mp.inf)),
            "singularity": sing.to_dict(),
            "system": system.to_dict(),
        }
    store.write_json("separatrix.json", payload)
    return sing, payload


# ---------- melnikov ----------
def cli_melnikov(config: RunConfig, store: ResultStore):
    with mp.workdps(BASE_DIGITS):
        _, _, _, sing = _prepare(config)
        a = sing.a
    rows, datas = [], []
    for eps in _feasible(config, a):
        digits = _required_digits(config, a, eps)
        with mp.workdps(digits):
            system, cp, sep, sing_hp = _prepare(config, eps)
            data = melnikov_function(system, sep, to_mpf(eps), singularity=sing_hp)
            datas.append(data)
            for mu in config.mus:
                for row in data.to_rows(to_mpf(mu)):
                    row = {k: fmt(v) for k, v in row.items()}
                    row["mu"] = mu_key(mu)
                    rows.append(row)
    store.write_csv("melnikov.csv", _sorted_rows(rows), MELNIKOV_COLUMNS)
    f0 = extrapolate_f0(datas)
    logger.info("Melnikov f0 limit: %s", fmt(f0, 12))
    return datas, f0


# ---------- inner ----------
def cli_inner(config: RunConfig, store: ResultStore):
    digits = int(config.inner.get("digits", INNER_DIGITS))
    results = []
    with mp.workdps(digits):
        system, _, _, sing = _prepare(config)
        domain = config.inner_domain()
        model = None
        for mu in config.mus:
            mu_value = to_mpf(mu)
            model = build_inner_model(system, sing, mu_value, r_form=config.r_form)
            if mu == 0:
                diff = compute_difference(None, None, mu_value, C_plus=sing.C_plus)
            else:
                u_sol, s_sol = solve_inner_manifolds(model, domain)
                diff = compute_difference(u_sol, s_sol, mu_value, C_plus=sing.C_plus)
            entry = diff.to_dict()
            entry["mu"] = mu_key(mu)
            entry["chi_first_order"] = fmt(first_order_stokes_constant(model))
            entry["b_closed"] = fmt(model.b_closed)
            results.append(entry)
        payload = {"model": model.to_dict(), "domain": domain.to_dict(), "results": results,
                   "digits": digits}
    store.write_json("inner.json", payload)
    return payload


# ---------- measure ----------
@dataclass(frozen=True)
class MeasureJob:
    spec: object
    n: int
    m: int
    epsilon: Fraction
    mu: Fraction
    digits: int
    manifold_order: int
    saddle_index: int = None
    spectrum: bool = False

    def key_payload(self) -> dict:
        return {"version": CACHE_VERSION, "spec": self.spec.to_dict(), "n": self.n, "m": self.m,
                "epsilon": str(self.epsilon), "mu": str(self.mu), "digits": self.digits,
                "manifold_order": self.manifold_order, "saddle_index": self.saddle_index,
                "spectrum": self.spectrum}


def _measure_job(job: MeasureJob) -> dict:
    """Separatrix -> periodic orbit -> manifolds -> lobe area at one (eps, mu)."""
    started = time.perf_counter()
    precision = PrecisionContext(job.digits)
    with precision.scope():
        eps, mu = to_mpf(job.epsilon), to_mpf(job.mu)
        ctx = ResonanceContext.from_epsilon(job.spec, job.n, job.m, eps, mu)
        system = rescale_at_resonance(job.spec, ctx)
        cp = _working_saddle(system.potential(), job.saddle_index)
        sep = compute_separatrix(cp)
        smap = StroboscopicMap(system, eps, mu)
        po = find_periodic_orbit(smap, (cp.x_star, 0))
        W_u = compute_manifold(smap, po, "u", job.manifold_order, separatrix=sep)
        W_s = compute_manifold(smap, po, "s", job.manifold_order, separatrix=sep)
        hom = find_homoclinic_points(W_u, W_s)
        sample = lobe_area(hom)
        spread = None
        i, j = hom.pair
        if not hom.tangency and j + 1 < len(hom.points):
            other = lobe_area(hom, (j, j + 1))
            spread = abs(other.area - sample.area) / sample.area
        fraction = None
        if job.spectrum and not hom.tangency:
            fraction = gap_spectrum(hom).fraction
        runtime = time.perf_counter() - started
        samples = []
        for row in sample.to_rows():
            row["runtime_s"] = runtime
            row = {k: fmt(v) for k, v in row.items()}
            row["mu"] = mu_key(job.mu)
            samples.append(row)
        orbit = {
            "epsilon": fmt(job.epsilon), "mu": mu_key(job.mu), "digits": job.digits,
            "x_p": fmt(po.fixed_point[0]), "y_p": fmt(po.fixed_point[1]),
            "dx_p": fmt(po.offset[0], 10), "dy_p": fmt(po.offset[1], 10),
            "rho_u": fmt(po.multipliers[0]), "det_minus_one": fmt(mp.det(po.jacobian) - 1, 5),
            "bound_constant": fmt(po.bound_constant), "homoclinic_points": len(hom.points),
            "pair_spread": fmt(spread, 8), "gap_mode_fraction": fmt(fraction, 8),
        }
    return {"samples": samples, "orbit": orbit}


def _run_jobs(jobs, workers):
    if workers == 1 or len(jobs) <= 1:
        return [_measure_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_measure_job, jobs))


def cli_measure(config: RunConfig, store: ResultStore):
    """
    Lobe areas over the eps x mu grid.

    Jobs are independent; each one fixes its own precision. With ``resume``
    a job whose cache entry exists is not recomputed. Only this process
    writes to the store.
    """
    with mp.workdps(BASE_DIGITS):
        _, _, _, sing = _prepare(config)
        a = sing.a
    jobs = [MeasureJob(config.spec, config.n, config.m, eps, mu, _required_digits(config, a, eps),
                       config.manifold_order, config.saddle_index, config.spectrum)
            for eps in _feasible(config, a) for mu in config.mus]
    if not jobs:
        raise PrecisionError("no grid point is feasible under max_digits",
                             {"max_digits": config.max_digits})
    keys = [store.cache_key(job.key_payload()) for job in jobs]
    results = {}
    if config.resume:
        for key in keys:
            hit = store.cached(key)
            if hit is not None:
                results[key] = hit
    pending = [(job, key) for job, key in zip(jobs, keys) if key not in results]
    logger.info("measure: %d jobs, %d cached, %d workers", len(jobs), len(jobs) - len(pending),
                config.workers)
    for (job, key), result in zip(pending, _run_jobs([j for j, _ in pending], config.workers)):
        store.remember(key, result)
        results[key] = result

    samples, orbits = [], []
    for key in keys:
        for row in results[key]["samples"]:
            row = dict(row)
            if not config.record_timings:
                row["runtime_s"] = ""
            samples.append(row)
        orbits.append(results[key]["orbit"])
    store.write_csv("samples.csv", _sorted_rows(samples), SAMPLE_COLUMNS)
    store.write_csv("orbits.csv", _sorted_rows(orbits), ORBIT_COLUMNS)
    return samples, orbits


# ---------- fit and report ----------
def _inner_by_mu(store: ResultStore):
    if not store.exists("inner.json"):
        logger.warning("inner.json missing: b taken from the closed form, |f| unknown")
        return {}
    out = {}
    for entry in store.read_json("inner.json")["results"]:
        parse = lambda pair: mp.mpc(mp.mpf(pair[0]), mp.mpf(pair[1]))
        out[mu_key(entry["mu"])] = InnerDifference(
            mu=mp.mpf(entry["mu"]), chi={-1: parse(entry["chi_m1"]), -2: parse(entry["chi_m2"])},
            b=parse(entry["b"]), f=parse(entry["f"]), C_plus=None,
            chi_error=mp.mpf(entry["fit_error"]["chi"]), b_error=mp.mpf(entry["fit_error"]["b"]),
            contaminated=entry["contaminated"])
    return out


def _melnikov_rows(store: ResultStore):
    if not store.exists("melnikov.csv"):
        logger.warning("melnikov.csv missing: Melnikov comparison skipped")
        return []
    return store.read_csv("melnikov.csv")


def _melnikov_limit(rows):
    seen = {}
    for row in rows:
        if row["k"] == "1" and row["f0_re"] != "":
            seen[row["epsilon"]] = MelnikovData(mp.mpf(row["epsilon"]), {},
                                                mp.mpc(mp.mpf(row["f0_re"]), mp.mpf(row["f0_im"])))
    if not seen:
        return None
    return MelnikovData(mp.mpf(0), {}, extrapolate_f0(list(seen.values())))


def _melnikov_regime(samples, mel_rows):
    """Direct (action) lobe area against the Melnikov area at matching (eps, mu)."""
    mel = {(r["epsilon"], mu_key(r["mu"])): r["area_mel"] for r in mel_rows if r["k"] == "1"}
    out = []
    for s in samples:
        key = (s["epsilon"], mu_key(s["mu"]))
        if s["method"] != Method.ACTION or key not in mel or mp.mpf(s["area"]) == 0:
            continue
        direct, predicted = mp.mpf(s["area"]), mp.mpf(mel[key])
        out.append({"epsilon": s["epsilon"], "mu": s["mu"], "area": s["area"], "area_mel": mel[key],
                    "relative_difference": fmt(abs(direct - predicted) / direct, 8)})
    return out


def _orbit_bounds(orbits):
    by_mu = {}
    for row in orbits:
        if mp.mpf(row["mu"]) == 0:
            continue
        by_mu.setdefault(row["mu"], []).append(SimpleNamespace(
            epsilon=mp.mpf(row["epsilon"]),
            offset=(mp.mpf(row["dx_p"]), mp.mpf(row["dy_p"])),
            bound_constant=mp.mpf(row["bound_constant"]) if row["bound_constant"] else None))
    report = {}
    for mu, rows in sorted(by_mu.items()):
        bounds = periodic_orbit_bounds(rows)
        report[mu] = {"K": fmt(bounds["K"], 10), "x_slope": bounds["x_slope"],
                      "y_slope": bounds["y_slope"]}
    return report


def gnuplot_script(fits) -> str:
    """ln A against 1/eps for the samples, with the fitted law per mu."""
    lines = [
        "# area against 1/eps; lines are the fitted laws",
        "set datafile separator ','",
        "set key top right",
        "set xlabel '1/eps'",
        "set ylabel 'A'",
        "set logscale y",
    ]
    plots = []
    for index, (mu, fit) in enumerate(fits):
        tag = f"mu={fmt(mu, 6)}"
        law = (f"4*{fmt(fit.K_fit, 15)}*(1/x)**({fmt(fit.beta_fit, 15)})"
               f"*exp(-{fmt(fit.a_fit, 15)}*x)")
        if fit.corrected:
            law += f"*exp({fmt(fit.c_fit, 15)}/log(x))"
        lines.append(f"f{index}(x) = {law}")
        plots.append(f"'samples.csv' using ((abs($2-{fmt(mu, 20)})<1e-12 && strcol(6) eq '{Method.ACTION}') ? "
                     f"1/$1 : 1/0):4 with points title '{tag}'")
        plots.append(f"f{index}(x) with lines title 'fit {tag}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cli_fit(config: RunConfig, store: ResultStore):
    """Fit the area law per mu and compare with the inner and Melnikov predictions."""
    samples = store.read_csv("samples.csv")
    orbits = store.read_csv("orbits.csv") if store.exists("orbits.csv") else []
    with mp.workdps(BASE_DIGITS):
        system, _, _, sing = _prepare(config)
        inner = _inner_by_mu(store)
        mel_rows = _melnikov_rows(store)
        mel = _melnikov_limit(mel_rows)
        fits, report = [], {"fits": {}, "theory": {}, "verdicts": {}, "prefactor": {},
                            "b_two_ways": {}, "errors": {}}
        for mu in config.mus:
            if mu == 0:
                continue
            tag, key = fmt(mu, 6), mu_key(mu)
            rows = [s for s in samples if mu_key(s["mu"]) == key and s["method"] == Method.ACTION]
            pred = predict(sing, inner.get(key), to_mpf(mu), g3=system.g3)
            report["theory"][tag] = pred.to_dict()
            report["b_two_ways"][tag] = {
                "inner": None if key not in inner else fmt(inner[key].b, 12),
                "closed_form": fmt(pred.b_closed, 12),
                "difference": None if key not in inner or pred.b_closed is None
                else fmt(abs(inner[key].b - pred.b_closed), 5),
                "flagged": pred.flagged}
            try:
                fit = fit_splitting(rows)
            except FitError as exc:
                logger.warning("no fit at mu=%s: %s", tag, exc)
                report["errors"][tag] = exc.to_dict()
                continue
            fits.append((mu, fit))
            report["fits"][tag] = fit.to_dict()
            report["verdicts"][tag] = melnikov_verdict(fit, pred, mel, to_mpf(mu))
            report["prefactor"][tag] = prefactor_convergence(rows, pred.a, mp.im(pred.b), to_mpf(mu))
            if mu == 1 and config.spec.h02 > 0:
                original = to_original_variables(pred, config.spec, config.context(), theta=fit.K_fit)
                report["original_variables"] = original.to_dict()
        if len(fits) >= 2:
            report["beta_mu_slope"] = beta_mu_slope([(to_mpf(mu), fit) for mu, fit in fits])
        report["melnikov_regime"] = _melnikov_regime(samples, mel_rows)
        report["melnikov_f0"] = None if mel is None else fmt(mel.f0_estimate, 15)
        report["periodic_orbit"] = _orbit_bounds(orbits)
        report["lobe_checks"] = {
            "flagged_samples": sum(1 for s in samples if s["flagged"] == "true"),
            "pair_spread_max": max((r["pair_spread"] for r in orbits if r["pair_spread"]),
                                   key=lambda v: mp.mpf(v), default=None),
        }
    store.write_json("report.json", report)
    store.write_text("plot.gp", gnuplot_script(fits))
    return report


def cli_report(config: RunConfig, store: ResultStore) -> str:
    """Plain-text summary of report.json."""
    report = store.read_json("report.json")
    lines = [f"resonance {config.n}/{config.m}, out={store.root}"]
    for tag, fit in sorted(report["fits"].items()):
        verdict = report["verdicts"].get(tag, {}).get("verdict", "")
        lines.append(f"mu={tag}: a={fit['a']} beta={fit['beta']} K={fit['K']}  [{verdict}]")
    for tag, entry in sorted(report["b_two_ways"].items()):
        lines.append(f"mu={tag}: b inner={entry['inner']} closed={entry['closed_form']}")
    for row in report.get("melnikov_regime", []):
        lines.append(f"eps={row['epsilon']} mu={row['mu']}: direct vs Melnikov "
                     f"{row['relative_difference']}")
    if "original_variables" in report:
        lines.append(f"original law: {report['original_variables']['formula']}")
    return "\n".join(lines)
