"""Command-line entry point: ``trivopt bench | verify | expm-bench``.

Settings come from defaults, then an optional ``key = value`` file given by
``--config``, then command-line flags. Exit codes: 0 success, 1 failed check,
2 divergence, 64 bad configuration.
"""
import argparse
import dataclasses
import io
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import dense
from .errors import ContractError, DivergenceError
from .expm import expm, ps_cost
from .manifolds import frame_skew, orthogonality_residual
from .optimizers import make_optimizer
from .problems import CopyTask, CopyTaskConfig, karcher_spd, procrustes, rayleigh, trace_pca
from .trivialize import Always, EveryK, GradRatio, Never, TrivRun, curvature_lr, step
from .verify import CHECK_NAMES, HESS_TOL, RAUCH_TOL, FDConfig, format_report, run_grid

__all__ = ["ConfigError", "RunConfig", "parse_config", "read_config_file", "build_problem", "bench", "verify",
           "expm_bench", "main", "CSV_HEADER", "EXIT_OK", "EXIT_CHECK", "EXIT_DIVERGED", "EXIT_CONFIG"]

EXIT_OK, EXIT_CHECK, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2, 64
COMMANDS = ("bench", "verify", "expm-bench")
PROBLEMS = ("procrustes", "rayleigh", "karcher", "stiefel", "grassmann", "copy")
RULES = ("never", "always", "everyk", "gradratio")
OPTIMIZERS = ("gd", "momentum", "adam")
DEFAULT_N = {"procrustes": 4, "rayleigh": 10, "karcher": 4, "stiefel": 6, "grassmann": 6, "copy": 64}
CSV_HEADER = "iter,f_value,grad_norm_raw,grad_norm_riemannian,stop_fired,outer_i,wall_ms,diverged"


class ConfigError(ContractError):
    """Bad configuration: unknown key, malformed value or missing requirement."""


# Value parsers ---------------------------------------------------------------


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError
    return v


def _pos_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0.0):
        raise ValueError
    return v


def _nonneg_float(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0.0):
        raise ValueError
    return v


def _unit_float(text):
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise ValueError
    return v


def _lr(text):
    if text.strip().lower() == "curvature":
        return "curvature"
    return _pos_float(text)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError


def _choice(options):
    def parse(text):
        t = text.strip().lower()
        if t not in options:
            raise ValueError
        return t
    parse.expected = "one of " + ", ".join(options)
    return parse


def _checks(text):
    names = tuple(c.strip() for c in text.split(",") if c.strip())
    if not names or any(c not in CHECK_NAMES for c in names):
        raise ValueError
    return names


def _text(text):
    if not text.strip():
        raise ValueError
    return text.strip()


_EXPECTED = {
    _pos_int: "a positive integer",
    _nonneg_int: "a non-negative integer",
    _pos_float: "a positive number",
    _nonneg_float: "a non-negative number",
    _unit_float: "a number in [0, 1)",
    _lr: "a positive number or 'curvature'",
    _bool: "a boolean",
    _checks: "a comma list drawn from " + ", ".join(CHECK_NAMES),
    _text: "a non-empty string",
}

# key -> (parser, help); defaults live on RunConfig
FIELDS = {
    "problem": (_choice(PROBLEMS), "objective to optimise"),
    "n": (_pos_int, "ambient size (problem default when omitted)"),
    "k": (_pos_int, "columns for stiefel and grassmann"),
    "opt": (_choice(OPTIMIZERS), "optimiser"),
    "lr": (_lr, "learning rate, or 'curvature' for the guaranteed step"),
    "alpha": (_pos_float, "Hessian bound of f for lr = curvature"),
    "radius": (_pos_float, "radius R for lr = curvature"),
    "beta": (_unit_float, "momentum coefficient"),
    "beta1": (_unit_float, "Adam first-moment decay"),
    "beta2": (_unit_float, "Adam second-moment decay"),
    "rule": (_choice(RULES), "stopping rule"),
    "k_every": (_pos_int, "K for rule everyk"),
    "eps_low": (_pos_float, "lower ratio for rule gradratio"),
    "eps_high": (_pos_float, "upper ratio for rule gradratio"),
    "reset": (_choice(("full", "curved")), "optimiser blocks cleared when the anchor moves"),
    "iters": (_pos_int, "iterations (bench) or repetitions (expm-bench)"),
    "seed": (_nonneg_int, "random seed"),
    "out": (_text, "output path, '-' for stdout"),
    "tol_grad": (_nonneg_float, "stop once the raw gradient norm is below this"),
    "timing": (_bool, "fill the wall_ms column"),
    "orth_mult": (_pos_float, "copy task: orthogonal learning rate multiple"),
    "alphabet": (_pos_int, "copy task: alphabet size A"),
    "seq_len": (_pos_int, "copy task: payload length S"),
    "spacing": (_pos_int, "copy task: blank stretch L"),
    "batch": (_pos_int, "copy task: batch size"),
    "checks": (_checks, "verify: comma list of check families"),
    "tol": (_nonneg_float, "verify: tolerance for the rauch and hess checks"),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: str = "procrustes"
    n: int = None
    k: int = 2
    opt: str = "gd"
    lr: object = 0.01
    alpha: float = None
    radius: float = None
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    rule: str = "never"
    k_every: int = None
    eps_low: float = 0.1
    eps_high: float = 10.0
    reset: str = "full"
    iters: int = 100
    seed: int = 0
    out: str = "-"
    tol_grad: float = 0.0
    timing: bool = False
    orth_mult: float = 7.0
    alphabet: int = 9
    seq_len: int = 10
    spacing: int = 100
    batch: int = 64
    checks: tuple = CHECK_NAMES
    tol: float = None

    def size(self):
        return self.n if self.n is not None else DEFAULT_N[self.problem]

    def lines(self):
        return [f"{f.name} = {_show(getattr(self, f.name))}" for f in dataclasses.fields(self)]


def _show(v):
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return "none" if v is None else str(v)


def _convert(key, text, where):
    if key not in FIELDS:
        raise ConfigError(f"unknown key '{key}'{where}")
    parser = FIELDS[key][0]
    try:
        return parser(text)
    except (TypeError, ValueError):
        expected = getattr(parser, "expected", None) or _EXPECTED[parser]
        raise ConfigError(f"key '{key}'{where}: expected {expected}, got {text!r}") from None


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment. Returns {key: value}."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
    out = {}
    for num, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f" ({path}:{num})"
        if "=" not in body:
            raise ConfigError(f"malformed line{where}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        key = key.replace("-", "_")
        out[key] = _convert(key, value, where)
    return out


def _validate(cfg: RunConfig):
    if cfg.rule == "everyk" and cfg.k_every is None:
        raise ConfigError("missing required key 'k_every' (the K of rule everyk)")
    if cfg.rule == "gradratio" and not cfg.eps_low < 1.0 < cfg.eps_high:
        raise ConfigError(f"keys 'eps_low', 'eps_high': need eps_low < 1 < eps_high, got {cfg.eps_low}, {cfg.eps_high}")
    if cfg.command == "bench" and cfg.lr == "curvature":
        if cfg.radius is None:
            raise ConfigError("missing required key 'radius' for lr = curvature")
        if cfg.problem in ("karcher", "copy"):
            raise ConfigError(f"key 'lr': 'curvature' is unavailable for problem {cfg.problem}; give a number")
    if cfg.problem in ("stiefel", "grassmann") and cfg.k >= cfg.size():
        raise ConfigError(f"key 'k': need k < n, got k={cfg.k}, n={cfg.size()}")
    if cfg.problem == "procrustes" and cfg.size() < 2:
        raise ConfigError("key 'n': procrustes needs n >= 2")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser():
    p = _Parser(prog="trivopt", description="Optimisation on matrix manifolds by dynamic trivialisations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="file of 'key = value' lines; flags win over it")
    p.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    for key, (_, help_) in FIELDS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS, help=help_)
    return p


def parse_config(argv):
    """(RunConfig, dry_run) from command-line words, merging the optional file underneath."""
    ns = vars(_parser().parse_args(list(argv)))
    command = ns.pop("command")
    path = ns.pop("config", None)
    dry = ns.pop("dry_run")
    values = read_config_file(path) if path else {}
    for key, text in ns.items():
        values[key] = _convert(key, text, f" (flag --{key.replace('_', '-')})")
    return _validate(RunConfig(command=command, **values)), dry


# Problems --------------------------------------------------------------------


def _random_spd(rng, n):
    M = rng.standard_normal((n, n))
    w = np.exp(rng.uniform(-1.0, 1.0, n))
    Q = dense.qr(M)[0]
    return dense.sym((Q * w) @ Q.T)


def build_problem(cfg: RunConfig):
    """(problem, objective, initial base, learning rate) for a bench run."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.size()
    if cfg.problem == "copy":
        task = CopyTask(CopyTaskConfig(cfg.alphabet, cfg.seq_len, cfg.spacing, n, cfg.batch, cfg.seed))
        lr = (cfg.orth_mult * cfg.lr, cfg.lr, cfg.lr)
        return task, task.training_objective(), task.initial_base(cfg.seed), lr
    if cfg.problem == "procrustes":
        prob = procrustes(rng.standard_normal((n, n)), rng.standard_normal((n, n)))
    elif cfg.problem == "rayleigh":
        M = rng.standard_normal((n, n))
        prob = rayleigh(M + M.T)
    elif cfg.problem == "karcher":
        prob = karcher_spd([_random_spd(rng, n), _random_spd(rng, n)])
    else:
        M = rng.standard_normal((n, n))
        prob = trace_pca(M + M.T, cfg.k, grassmann=cfg.problem == "grassmann")
    lr = cfg.lr
    if lr == "curvature":
        alpha = cfg.alpha if cfg.alpha is not None else prob.alpha
        if alpha is None:
            raise ConfigError(f"missing required key 'alpha' for lr = curvature on {cfg.problem}")
        lr = curvature_lr(prob.spec, alpha, cfg.radius)
    return prob, prob, prob.initial_base(np.random.default_rng([cfg.seed, 1])), lr


def _rule(cfg):
    if cfg.rule == "always":
        return Always()
    if cfg.rule == "everyk":
        return EveryK(cfg.k_every)
    if cfg.rule == "gradratio":
        return GradRatio(cfg.eps_low, cfg.eps_high)
    return Never()


def _optimizer(cfg, lr):
    if cfg.opt == "momentum":
        return make_optimizer("momentum", lr, beta=cfg.beta)
    if cfg.opt == "adam":
        return make_optimizer("adam", lr, beta1=cfg.beta1, beta2=cfg.beta2)
    return make_optimizer("gd", lr)


# Commands --------------------------------------------------------------------


def _g(x):
    return "%.17g" % x


def bench(cfg: RunConfig, stream):
    """Write the per-iteration CSV trace to ``stream``; returns the exit code."""
    prob, objective, base, lr = build_problem(cfg)
    trun = TrivRun(prob.spec, base, _optimizer(cfg, lr), _rule(cfg), reset=cfg.reset)
    stream.write(CSV_HEADER + "\n")
    t0 = time.perf_counter()
    for i in range(cfg.iters):
        try:
            rec = step(trun, objective)
        except DivergenceError as exc:
            wall = _g(1e3 * (time.perf_counter() - t0)) if cfg.timing else ""
            stream.write(f"{i},nan,nan,nan,0,{trun.outer_i},{wall},1\n")
            print(f"diverged at iteration {exc.iteration}: {exc.reason}", file=sys.stderr)
            return EXIT_DIVERGED
        wall = _g(1e3 * (time.perf_counter() - t0)) if cfg.timing else ""
        stream.write(",".join([str(rec.iteration), _g(rec.f), _g(rec.grad_norm_raw), _g(rec.grad_norm_riemannian),
                               "1" if rec.stop_fired else "0", str(rec.outer_i), wall, "0"]) + "\n")
        if rec.grad_norm_raw < cfg.tol_grad:
            break
    return EXIT_OK


def verify(cfg: RunConfig, stream):
    """Run the check grid, write the report and return 0 iff everything passed."""
    fd = FDConfig(seed=cfg.seed)
    rauch_tol = cfg.tol if cfg.tol is not None else RAUCH_TOL
    hess_tol = cfg.tol if cfg.tol is not None else HESS_TOL
    results = run_grid(cfg.checks, fd, rauch_tol, hess_tol)
    stream.write(format_report(results))
    failed = [r for r in results if not r.passed and not r.skipped]
    stream.write(f"# {len(results) - len(failed)} of {len(results)} checks passed\n")
    return EXIT_OK if not failed else EXIT_CHECK


EXPM_SIZES = (4, 16, 64)
EXPM_NORMS = (0.5, 2.0, 10.0)


def expm_bench(cfg: RunConfig, stream):
    """Time expm on random skew matrices; one CSV row per (n, norm)."""
    rng = np.random.default_rng(cfg.seed)
    sizes = (cfg.n,) if cfg.n is not None else EXPM_SIZES
    stream.write("n,norm,scaling_exponent,taylor_degree,products,orth_residual,wall_ms\n")
    for n in sizes:
        for norm in EXPM_NORMS:
            A = frame_skew(rng.standard_normal((n, n)))
            A *= norm / dense.fro(A)
            t0 = time.perf_counter()
            for _ in range(cfg.iters):
                Q, rep = expm(A, return_report=True)
            ms = 1e3 * (time.perf_counter() - t0) / cfg.iters
            products = ps_cost(rep.taylor_degree) + rep.scaling_exponent
            stream.write(f"{n},{_g(norm)},{rep.scaling_exponent},{rep.taylor_degree},{products},"
                         f"{_g(orthogonality_residual(Q))},{ms:.4f}\n")
    return EXIT_OK


def _dispatch(cfg, stream):
    if cfg.command == "bench":
        return bench(cfg, stream)
    if cfg.command == "verify":
        return verify(cfg, stream)
    return expm_bench(cfg, stream)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, dry = parse_config(argv)
    except ConfigError as exc:
        print(f"trivopt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if dry:
        print("\n".join(cfg.lines()))
        return EXIT_OK
    buf = io.StringIO()
    try:
        code = _dispatch(cfg, buf)
    except ConfigError as exc:
        print(f"trivopt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
