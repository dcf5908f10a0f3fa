"""Command-line entry point.

Subcommands: ``simulate`` (walk dumps), ``bound`` (tail-bound reports on a
threshold grid), ``certify`` (Hoffmann-Jorgensen certificate), ``verify``
(domination + invariance + martingale suites), ``selftest`` (quick oracle
checks).  Exit codes: 0 success, 2 validation error, 3 assertion failure in
verify/selftest.  All randomness flows from one top-level seed so every
reported number is replayable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds, hj, mc, sampling, special, spd

CONFIG_KEYS = {"m", "a", "n", "t", "t_grid", "hj", "N", "seed", "output", "format"}
HJ_KEYS = {"l", "n_list", "t0", "t_list", "n"}
DEFAULT_T_GRID = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0]


class ConfigError(ValueError):
    pass


class VerificationFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    m: int | None = None
    a: float | None = None
    n: int | None = None
    t_grid: list | None = None
    hj: hj.HjConfig | None = None
    n_samples: int | None = None
    seed: int | None = None
    output: str | None = None
    format: str = "json"
    threads: int = 1

    def to_dict(self) -> dict:
        out = {}
        if self.m is not None:
            out["m"] = self.m
        if self.a is not None:
            out["a"] = self.a
        if self.n is not None:
            out["n"] = self.n
        if self.t_grid is not None:
            out["t_grid"] = list(self.t_grid)
        if self.hj is not None:
            out["hj"] = {
                "l": self.hj.l,
                "n_list": list(self.hj.n_list),
                "t0": self.hj.t0,
                "t_list": list(self.hj.t_list),
                "n": self.hj.n,
            }
        if self.n_samples is not None:
            out["N"] = self.n_samples
        if self.seed is not None:
            out["seed"] = self.seed
        if self.output is not None:
            out["output"] = self.output
        out["format"] = self.format
        return out


def _load_config_file(path: str) -> dict:
    try:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = _load_config_file(args.config) if args.config else {}
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(subcommand=args.subcommand)
    if "m" in raw:
        cfg.m = int(raw["m"])
    if "a" in raw:
        cfg.a = float(raw["a"])
    if "n" in raw:
        cfg.n = int(raw["n"])
    if "t" in raw and "t_grid" in raw:
        raise ConfigError("give either t or t_grid, not both")
    if "t" in raw:
        cfg.t_grid = [float(raw["t"])]
    if "t_grid" in raw:
        cfg.t_grid = [float(t) for t in raw["t_grid"]]
    if "hj" in raw:
        block = raw["hj"]
        unknown = set(block) - HJ_KEYS
        if unknown:
            raise ConfigError(f"unknown hj config keys: {sorted(unknown)}")
        missing = HJ_KEYS - set(block)
        if missing:
            raise ConfigError(f"hj config block missing keys: {sorted(missing)}")
        try:
            cfg.hj = hj.HjConfig(
                l=int(block["l"]), n_list=tuple(block["n_list"]),
                t0=float(block["t0"]), t_list=tuple(block["t_list"]),
                n=int(block["n"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if "N" in raw:
        cfg.n_samples = int(raw["N"])
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    if "output" in raw:
        cfg.output = str(raw["output"])
    if "format" in raw:
        cfg.format = str(raw["format"])
    # flags override file values
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    if args.format is not None:
        cfg.format = args.format
    cfg.threads = args.threads
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {cfg.format!r}")
    if cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def _require(cfg: RunConfig, *names: str):
    labels = {"m": "m", "a": "a", "n": "n", "t_grid": "t or t_grid",
              "n_samples": "N", "seed": "seed", "hj": "hj block"}
    missing = [labels[name] for name in names if getattr(cfg, name) is None]
    if missing:
        raise ConfigError(
            f"subcommand {cfg.subcommand!r} needs config values: {', '.join(missing)}"
        )


def _params(cfg: RunConfig) -> sampling.WishartParams:
    try:
        return sampling.WishartParams(m=cfg.m, a=cfg.a)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write(cfg: RunConfig, text: str):
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(cfg: RunConfig) -> int:
    _require(cfg, "m", "a", "n", "n_samples", "seed")
    params = _params(cfg)
    lines = [json.dumps({"config": cfg.to_dict()}, separators=(",", ":"))]
    for k in range(cfg.n_samples):
        stream = sampling.RngStream(cfg.seed, k)
        path = sampling.generate_walk(params, cfg.n, stream)
        stats = sampling.walk_statistics(path)
        record = sampling.walk_to_jsonl(path, stream)
        stats_json = (
            f'"stats":{{"max_step_dist":{stats.max_step_dist!r},'
            f'"max_partial_dist":{stats.max_partial_dist!r}}}'
        )
        lines.append(record[:-1] + "," + stats_json + "}")
    _write(cfg, "\n".join(lines) + "\n")
    return 0


def _bound_reports(params, n, t_grid):
    reports = []
    for t in t_grid:
        reports.append(bounds.step_max_tail_bound(params, n, t))
        reports.append(bounds.walk_max_tail_bound(params, n, t))
        reports.append(bounds.walk_max_tail_bound_geometric(params, n, t))
        if params.a > 0.5 * (params.m + 1):
            reports.append(bounds.walk_max_cdf_bound(params, n, t, j_max=1))
    return reports


def cmd_bound(cfg: RunConfig) -> int:
    _require(cfg, "m", "a", "n", "t_grid")
    params = _params(cfg)
    reports = _bound_reports(params, cfg.n, cfg.t_grid)
    if cfg.format == "csv":
        lines = ["m,a,n,t,bound_name,raw,clamped,status"]
        for r in reports:
            lines.append(
                f"{params.m},{params.a!r},{r.n},{r.t!r},{r.bound_name},"
                f"{r.raw!r},{r.clamped!r},{r.status}"
            )
        _write(cfg, "\n".join(lines) + "\n")
    else:
        payload = {"config": cfg.to_dict(), "reports": [r.to_dict() for r in reports]}
        _write(cfg, json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    _require(cfg, "m", "a", "hj")
    params = _params(cfg)
    try:
        result = hj.certified_hj_bound(params, cfg.hj)
    except special.DomainError as exc:
        raise ConfigError(str(exc)) from exc
    payload = json.loads(result.to_json())
    payload["config"] = cfg.to_dict()
    _write(cfg, json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    _require(cfg, "m", "a", "n", "n_samples", "seed")
    params = _params(cfg)
    t_grid = cfg.t_grid if cfg.t_grid is not None else list(DEFAULT_T_GRID)
    dom = mc.domination_suite(
        params, cfg.n, t_grid, cfg.n_samples,
        sampling.RngStream(cfg.seed, 0), threads=cfg.threads,
    )
    inv = mc.invariance_suite(params, cfg.n_samples, sampling.RngStream(cfg.seed, 2_000_000))
    mart = mc.martingale_suite(params, cfg.n, cfg.n_samples, sampling.RngStream(cfg.seed, 3_000_000))
    sections = [
        f"# domination m={params.m} a={params.a!r} n={cfg.n} seed={cfg.seed} N={cfg.n_samples}",
        dom.to_csv().rstrip("\n"),
        "# invariance",
        inv.to_csv().rstrip("\n"),
        "# martingale",
        mart.to_csv().rstrip("\n"),
    ]
    _write(cfg, "\n".join(sections) + "\n")
    summary = {
        "config": cfg.to_dict(),
        "passed": dom.passed and inv.passed and mart.passed,
        "domination": {
            "violations": dom.violations,
            "geometric_consistent": dom.geometric_consistent,
        },
        "invariance": {"passed": inv.passed},
        "martingale": {"passed": mart.passed},
    }
    if cfg.output:
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    if not summary["passed"]:
        raise VerificationFailure("verification suite reported failures")
    return 0


def _selftest_checks():
    rt2 = math.sqrt(2.0)
    params22 = sampling.WishartParams(2, 2.0)
    params12 = sampling.WishartParams(1, 2.0)

    def eigen_diagonal():
        got = spd.sym_eigenvalues(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(got, [1.0, 2.0, 3.0], atol=1e-12)

    def eigen_2x2():
        got = spd.sym_eigenvalues(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(got, [1.0, 3.0], atol=1e-12)

    def sqrt_diagonal():
        got = spd.matrix_sqrt(np.diag([4.0, 9.0]))
        assert np.allclose(got, np.diag([2.0, 3.0]), atol=1e-12)

    def sqrt_multiply_back():
        g = sampling.RngStream(7, 0).generator()
        x = sampling.wishart_sample(sampling.WishartParams(4, 4.0), g)
        s = spd.matrix_sqrt(x)
        assert np.linalg.norm(s @ s - x) <= 1e-9 * np.linalg.norm(x)

    def riemannian_examples():
        eye = np.eye(2)
        assert spd.riemannian_distance(eye, eye) == 0.0
        d = spd.riemannian_distance(np.diag([math.e ** 2, 1.0]), eye)
        assert abs(d - 2.0) < 1e-12

    def thompson_examples():
        eye = np.eye(2)
        d = spd.thompson_distance(np.diag([4.0, 0.5]), eye)
        assert abs(d - math.log(4.0)) < 1e-12
        d3 = spd.thompson_distance(2.0 * np.eye(3), np.eye(3))
        r3 = spd.riemannian_distance(2.0 * np.eye(3), np.eye(3))
        assert abs(d3 - math.log(2.0)) < 1e-12
        assert abs(r3 - math.sqrt(3.0) * math.log(2.0)) < 1e-12

    def compose_examples():
        a = np.diag([4.0, 1.0])
        b = np.diag([2.0, 3.0])
        assert np.allclose(spd.compose(a, b), np.diag([8.0, 3.0]), atol=1e-12)
        assert np.allclose(spd.compose(np.eye(2), b), b, atol=1e-12)

    def gamma_identities():
        assert abs(special.reg_gamma_lower(1.0, 1.3) - (1.0 - math.exp(-1.3))) < 1e-14
        assert abs(special.reg_gamma_lower(0.5, 1.0) - math.erf(1.0)) < 1e-12
        assert abs(special.multivariate_gamma_ln(2, 2.0) - math.log(math.pi / 2.0)) < 1e-12

    def band_integral_identities():
        assert special.f_single(params22, 1, 2.0, 2.0) == 0.0
        # pure exponential integrand when the power vanishes
        p = sampling.WishartParams(2, 1.5)
        got = special.f_single(p, 0, 0.5, 4.0)
        want = 2.0 * (math.exp(-0.25) - math.exp(-2.0))
        assert abs(got - want) < 1e-12
        fd = special.f_double(params22, 1, 1, 0.5, 4.0)
        fs = special.f_single(params22, 1, 0.5, 4.0)
        assert abs(fd - 0.5 * fs * fs) < 1e-10 * max(1.0, fs * fs)

    def pfaffian_small():
        assert special.pfaffian_abs(np.array([[0.0, 1.7], [-1.7, 0.0]])) == 1.7
        r = np.array([
            [0.0, 1.0, 2.0, 3.0],
            [-1.0, 0.0, 4.0, 5.0],
            [-2.0, -4.0, 0.0, 6.0],
            [-3.0, -5.0, -6.0, 0.0],
        ])
        assert abs(special.pfaffian_abs(r) - abs(1.0 * 6.0 - 2.0 * 5.0 + 3.0 * 4.0)) < 1e-12

    def k_integral_at_zero():
        s = (2.0 * 2.0 - 2.0 - 1.0) * 0.6
        want = math.lgamma(s + 1.0) - (s + 1.0) * math.log(0.6)
        assert abs(special.log_k_integral(params22, 0.0, 0.6) - want) < 1e-12

    def scalar_band_bound():
        from scipy.special import gammainc

        t, n = 1.5, 3
        rep = bounds.step_max_tail_bound(params12, n, t)
        p = gammainc(2.0, 0.5 * math.exp(t)) - gammainc(2.0, 0.5 * math.exp(-t))
        assert abs(rep.raw - (1.0 - p ** n)) < 1e-6

    def geometric_matches_plain_at_n1():
        plain = bounds.walk_max_tail_bound(params22, 1, 3.0)
        geo = bounds.walk_max_tail_bound_geometric(params22, 1, 3.0)
        assert abs(plain.raw - geo.raw) <= 1e-6 * plain.raw

    def cdf_bound_closed_form():
        rep = bounds.walk_max_cdf_bound(params12, 1, 1.0, j_max=1)
        assert abs(rep.raw - (1.0 - math.exp(-0.5 * math.e))) < 1e-9

    def hj_example_shape():
        config = hj.HjConfig(l=2, n_list=(1, 1), t0=2.0, t_list=(2.0, 2.0), n=4)
        membership = hj.hj_index_membership(config, [0.9, 0.9], [0.1, 0.1])
        assert membership == ["in", "in"]
        assert abs(hj.hj_threshold(config) - (2.0 + 3.0 * 2.0)) < 1e-12

    def wilson_basics():
        low, high = mc.wilson_interval(50, 100)
        assert low < 0.5 < high
        assert mc.wilson_interval(0, 100)[0] == 0.0

    def ks_basics():
        x = np.linspace(0.0, 1.0, 200)
        assert mc.ks_two_sample(x, x).statistic == 0.0
        y = x + 5.0
        assert mc.ks_two_sample(x, y).statistic == 1.0

    def walk_identities():
        path = sampling.generate_walk(params22, 1, sampling.RngStream(3, 0))
        assert np.array_equal(path.partials[0], path.steps[0])
        stats = sampling.walk_statistics(path)
        assert stats.max_step_dist == stats.max_partial_dist

    return [
        ("eigenvalues_diagonal", eigen_diagonal),
        ("eigenvalues_2x2", eigen_2x2),
        ("sqrt_diagonal", sqrt_diagonal),
        ("sqrt_multiply_back", sqrt_multiply_back),
        ("riemannian_examples", riemannian_examples),
        ("thompson_examples", thompson_examples),
        ("compose_examples", compose_examples),
        ("gamma_identities", gamma_identities),
        ("band_integral_identities", band_integral_identities),
        ("pfaffian_small", pfaffian_small),
        ("k_integral_at_zero", k_integral_at_zero),
        ("scalar_band_bound", scalar_band_bound),
        ("geometric_matches_plain_at_n1", geometric_matches_plain_at_n1),
        ("cdf_bound_closed_form", cdf_bound_closed_form),
        ("hj_example_shape", hj_example_shape),
        ("wilson_basics", wilson_basics),
        ("ks_basics", ks_basics),
        ("walk_identities", walk_identities),
    ]


def cmd_selftest(cfg: RunConfig) -> int:
    failures = []
    for name, check in _selftest_checks():
        try:
            check()
            print(f"ok   {name}")
        except Exception as exc:  # a failed oracle is the reportable outcome
            failures.append((name, exc))
            print(f"FAIL {name}: {exc}")
    if failures:
        raise VerificationFailure(f"{len(failures)} selftest checks failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdwalk",
        description="Composition random walks on the SPD cone: simulation, bounds, verification.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (
        ("simulate", "sample walks and write one JSON line per walk"),
        ("bound", "evaluate analytic tail bounds on a threshold grid"),
        ("certify", "evaluate the Hoffmann-Jorgensen certificate"),
        ("verify", "run domination, invariance, and martingale suites"),
        ("selftest", "run quick oracle checks"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker count (default 1)")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), help="output format")
    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "certify": cmd_certify,
    "verify": cmd_verify,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _DISPATCH[args.subcommand](cfg)
    except (ConfigError, ValueError, special.DomainError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "kind": "validation"}) + "\n")
        return 2
    except VerificationFailure as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "kind": "assertion"}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
