"""Noise generation and the collocation experiment protocol.

The model problem is the convolution equation of order l with exact
solution u*(s) = s^r, solved by collocation with linear splines (k = 2)
and nodes t_{i,1} = (i-1+c)h, t_{i,2} = ih.  Noisy node data are

    f_delta(t_ij) = f(t_ij) + delta * theta_ij,

where the theta_ij are standard normal draws rescaled so that
max |theta_ij| = 1; the noise level in the node-sampled sup norm is then
exactly delta.  For each noise level the experiment records the optimal
dimension n_opt (minimizing the L^p error against u*), the dimension n_D
chosen by the discrepancy principle with b = 1.01 + tau(c), both errors,
and the a posteriori optimal constant b_opt.

Randomness comes from the counter-based Philox generator keyed per
(seed, n); normal variates use the Marsaglia polar method on Philox
uniforms, making every table cell reproducible from its scalar seed.

The sup-norm residual compares A u_n on a dense grid against the noisy
data extended off the nodes by linear interpolation of the noise values
(the data function itself is known everywhere; only the noise needs
extending).
"""

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .config import SUP_SAMPLES_PER_CELL
from .operators import CollocationScheme, Kernel, dense_forward_matrix, model_rhs
from .rules import choose_n_discrepancy, tau_of_c
from .solvers import solve_collocation
from .spaces import composite_gauss, quadrature_breaks
from .splines import Mesh

__all__ = ["ExperimentConfig", "ExperimentRow", "gen_noise", "subseed",
           "run_cell", "run_table", "error_vs_power", "write_table_csv"]


def subseed(*parts):
    """Deterministic 64-bit sub-seed from integer parts."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def _polar_normals(rng, count):
    """Standard normal draws by the Marsaglia polar method."""
    out = np.empty(count)
    filled = 0
    while filled < count:
        m = max(8, count - filled)
        u = 2.0 * rng.random(m) - 1.0
        v = 2.0 * rng.random(m) - 1.0
        s = u * u + v * v
        keep = (s > 0.0) & (s < 1.0)
        factor = np.sqrt(-2.0 * np.log(s[keep]) / s[keep])
        pair = np.concatenate([u[keep] * factor, v[keep] * factor])
        take = min(pair.size, count - filled)
        out[filled:filled + take] = pair[:take]
        filled += take
    return out


def gen_noise(nodes, delta, seed):
    """Noise increments at the nodes: delta * theta with max |theta| = 1.

    Deterministic given the seed (Philox counter generator, polar-method
    normals); delta = 0 returns exact zeros.
    """
    count = len(nodes)
    if count < 1:
        raise ValueError("need at least one node")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return np.zeros(count)
    rng = np.random.Generator(np.random.Philox(key=int(seed) % 2**64))
    theta = _polar_normals(rng, count)
    theta /= np.max(np.abs(theta))
    return delta * theta


def error_vs_power(u, r, p=1.0, grade=40):
    """||u - s^r||_{L^p}, with quadrature graded geometrically towards 0
    to resolve the endpoint behaviour of s^r."""
    mesh = getattr(u, "mesh", None)
    breaks = quadrature_breaks(mesh=mesh, grade_zero=grade)
    x, w = composite_gauss(breaks)
    vals = u.eval(x) if hasattr(u, "eval") else u(x)
    return float(np.sum(w * np.abs(vals - x ** r) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a table run (defaults: the full grid)."""

    l: int = 2
    k: int = 2
    c: tuple = (0.6, 0.7, 0.8, 0.9)
    delta: tuple = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
    r_exp: tuple = (0.5, 1.5)
    n_max: int = 50
    b: float | None = None          # None: analytic b(c) = 1.01 + tau(c)
    error_p: float = 1.0
    seed: int = 1
    repetitions: int = 1
    out: str = "table.csv"

    def __post_init__(self):
        if any(d <= 0 for d in self.delta):
            raise ValueError("delta entries must be positive")
        if self.n_max < 1 or self.repetitions < 1:
            raise ValueError("n_max and repetitions must be >= 1")

    @classmethod
    def from_mapping(cls, data):
        kw = {}
        for f in fields(cls):
            if f.name not in data or data[f.name] is None:
                continue
            raw = data[f.name]
            if f.name in ("c", "delta", "r_exp"):
                if isinstance(raw, str):
                    raw = raw.split(",")
                kw[f.name] = tuple(float(x) for x in raw)
            elif f.name in ("l", "k", "n_max", "seed", "repetitions"):
                kw[f.name] = int(raw)
            elif f.name in ("b", "error_p"):
                kw[f.name] = float(raw)
            else:
                kw[f.name] = str(raw)
        return cls(**kw)

    @classmethod
    def from_file(cls, path, **overrides):
        data = parse_config_file(path)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data)


def parse_config_file(path):
    """Flat key-value config: one ``key = value`` per line, # comments."""
    data = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            data[key.strip().lower().replace("-", "_")] = value.strip()
    return data


@dataclass
class ExperimentRow:
    """One table cell."""

    c: float
    delta: float
    r: float
    n_opt: float | None = None
    e_opt: float | None = None
    n_D: float | None = None
    e_D: float | None = None
    b_used: float | None = None
    b_opt: float | None = None
    r_b: float | None = None
    r_e: float | None = None
    seed: object = None
    status: str = "ok"


def _scheme_c(config, c):
    if config.k == 2:
        if not 0.0 < c < 1.0:
            raise ValueError("the two-node scheme needs 0 < c < 1")
        return (c, 1.0)
    if config.k == 1:
        return (1.0,)
    raise ValueError("the experiment protocol uses k = 1 or k = 2")


def run_cell(config, c, delta, r, seed):
    """Full n-sweep for one (c, delta, r) cell."""
    kernel = Kernel.volterra(config.l)
    c_params = _scheme_c(config, c)
    b_used = config.b if config.b is not None else 1.01 + tau_of_c(c)
    results = {}
    errors = {}
    for n in range(1, config.n_max + 1):
        scheme = CollocationScheme(Mesh(n), c_params)
        nodes = scheme.nodes()
        f_exact = model_rhs(r, config.l, nodes)
        noise = gen_noise(nodes, delta, subseed(seed, n))
        result = solve_collocation(kernel, scheme, config.k, f_exact + noise)
        # C-norm discrepancy on the dense grid; the noisy data function is
        # the exact rhs plus linear interpolation of the node noise (its
        # distance to the exact data in C[0,1] is exactly delta)
        dense, fwd = dense_forward_matrix(kernel, scheme.mesh, config.k,
                                          SUP_SAMPLES_PER_CELL)
        f_ext = model_rhs(r, config.l, dense) + np.interp(dense, nodes, noise)
        a_vals = fwd @ result.u.coeffs.ravel()
        result.residual_C = float(np.max(np.abs(a_vals - f_ext)))
        results[n] = result
        errors[n] = error_vs_power(result.u, r, config.error_p)

    n_opt = min(errors, key=errors.get)
    row = ExperimentRow(c=c, delta=delta, r=r, n_opt=n_opt,
                        e_opt=errors[n_opt], b_used=b_used, seed=seed)
    if delta == 0.0:
        row.status = "exact_data"
        return row
    row.b_opt = results[n_opt].residual_C / delta
    row.r_b = b_used / row.b_opt if row.b_opt > 0 else math.inf
    trace = choose_n_discrepancy(lambda n: results[n], delta, b_used,
                                 config.n_max)
    if trace.reached:
        row.n_D = trace.chosen_n
        row.e_D = errors[trace.chosen_n]
        row.r_e = row.e_D / row.e_opt if row.e_opt > 0 else math.inf
    else:
        row.status = "dp_not_reached"
    return row


def run_table(config):
    """All cells of the configured grid, for every repetition, plus
    per-cell median rows.  Deterministic: cell seeds derive from
    (config.seed, repetition, cell indices)."""
    rows = []
    cells = [(ic, c, id_, d, ir, r)
             for ic, c in enumerate(config.c)
             for id_, d in enumerate(config.delta)
             for ir, r in enumerate(config.r_exp)]
    per_cell = {}
    for rep in range(config.repetitions):
        for ic, c, id_, d, ir, r in cells:
            seed = subseed(config.seed, rep, ic, id_, ir)
            try:
                row = run_cell(config, c, d, r, seed)
            except Exception as exc:   # record, keep going
                row = ExperimentRow(c=c, delta=d, r=r, seed=seed,
                                    status=f"error: {exc}")
            rows.append(row)
            per_cell.setdefault((ic, id_, ir), []).append(row)

    aggregates = []
    if config.repetitions > 1:
        for (ic, id_, ir), group in sorted(per_cell.items()):
            ok = [g for g in group if g.status == "ok"]
            agg = ExperimentRow(c=group[0].c, delta=group[0].delta,
                                r=group[0].r, seed="median",
                                status=f"aggregate({len(ok)}/{len(group)})")
            if ok:
                for name in ("n_opt", "e_opt", "n_D", "e_D", "b_opt",
                             "r_b", "r_e"):
                    setattr(agg, name,
                            float(np.median([getattr(g, name) for g in ok])))
                agg.b_used = ok[0].b_used
            aggregates.append(agg)
    return rows + aggregates


def _format_cell(name, value):
    if value is None:
        return ""
    if name == "delta":
        return f"{value:.1E}"
    if name in ("seed", "status"):
        return str(value)
    if name in ("n_opt", "n_D") and float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_table_csv(rows, path):
    names = [f.name for f in fields(ExperimentRow)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_format_cell(n, getattr(row, n)) for n in names])
    return path
