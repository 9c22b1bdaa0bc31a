"""Command-line front end: ``kickback-walk {verify,amplitude,sample,stats}``.

Options may also come from a flat ``key=value`` file (``--config``) whose keys
are the long flag names without dashes; flags given on the command line win.

Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .hamiltonian import build_reduced, kickback_gauge, verify_conservation
from .lattice import ChainConfig, ConfigError, PairState
from .process import SamplerSettings, ensemble, read_trajectories, write_trajectories, continuity_probe
from .propagator import amplitude_series, initial_state, terminal_site, time_grid
from .stats import EmptySubsampleError, conditional_cdfs

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
MODES = ("verify", "amplitude", "sample", "stats")

FIG1_DEFAULTS = dict(s=7, a=4, b=5, t_max=30.0, dt=0.05)
FIG4_DEFAULTS = dict(s=25, a=11, b=13, dt=0.005)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    s: int
    a: int
    b: int
    free: bool = False
    t_max: float = 30.0
    dt: float = 0.05
    n_traj: int = 10_000
    seed: int = 20080101
    target: tuple[int, int] | None = None
    horizon: float | None = None
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    hits_only: bool = False
    input: str | None = None
    free_input: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        chain = self.chain  # validates s, a, b
        if self.target is not None and not PairState(*self.target).is_valid(chain.s):
            raise ConfigError(f"target {self.target} is not a site of the pair lattice with s={chain.s}")
        if self.dt <= 0 or self.t_max < 0:
            raise ConfigError("need dt > 0 and t-max >= 0")
        if self.n_traj < 1:
            raise ConfigError(f"n-traj must be at least 1, got {self.n_traj}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.horizon}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def chain(self) -> ChainConfig:
        return ChainConfig(self.s, self.a, self.b, self.free)

    @property
    def target_site(self) -> PairState:
        return PairState(*self.target) if self.target else PairState(self.a + 1, self.b)

    @property
    def sampler(self) -> SamplerSettings:
        horizon = float(self.s) if self.horizon is None else self.horizon
        try:
            return SamplerSettings(dt=self.dt, horizon=horizon, n_traj=self.n_traj, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def emit(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            key = f.name.replace("_", "-")
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, tuple):
                v = ",".join(map(str, v))
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        return cls(**parse_config_text(text))


_TYPES = {
    "mode": str,
    "s": int,
    "a": int,
    "b": int,
    "free": bool,
    "t_max": float,
    "dt": float,
    "n_traj": int,
    "seed": int,
    "target": tuple,
    "horizon": float,
    "out": str,
    "format": str,
    "workers": int,
    "hits_only": bool,
    "input": str,
    "free_input": str,
}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind is tuple:
            x1, x2 = (int(v) for v in raw.strip("()").split(","))
            return (x1, x2)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kickback-walk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="key=value file; command-line flags take precedence")
        p.add_argument("--s", type=int)
        p.add_argument("--a", type=int)
        p.add_argument("--b", type=int)
        p.add_argument("--free", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--t-max", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--n-traj", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--target", type=str, help="site as x1,x2 (default a+1,b)")
        p.add_argument("--horizon", type=float, help="observation window (default s)")
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int)
        if mode == "sample":
            p.add_argument("--hits-only", action="store_true", default=None, help="keep trajectories that visit the target")
        if mode == "stats":
            p.add_argument("--input", help="interacting trajectory file (sampled inline if omitted)")
            p.add_argument("--free-input", help="free trajectory file (sampled inline if omitted)")
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc.strerror}") from exc
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is None or key == "mode":
            continue
        values[key] = _convert(key, v) if key == "target" else v
    values["mode"] = args.mode
    defaults = FIG1_DEFAULTS if args.mode in ("verify", "amplitude") else FIG4_DEFAULTS
    for k, v in defaults.items():
        values.setdefault(k, v)
    return RunConfig(**values)


# --- commands -------------------------------------------------------------------


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _gauge_residual(cfg: ChainConfig) -> float:
    h = build_reduced(cfg).dense()
    L = build_reduced(cfg.as_free()).dense()
    d = kickback_gauge(build_reduced(cfg).indexing, cfg.b)
    return float(np.max(np.abs(d[:, None] * h * d[None, :] - L)))


def verify_report(cfg: RunConfig, probes: int = 10, threshold: float = 1e-5) -> dict:
    chain = cfg.chain
    checks: dict[str, dict] = {}
    for label, c in (("interacting", chain.as_interacting()), ("free", chain.as_free())):
        rep = verify_conservation(c)
        checks[f"conservation_{label}"] = rep.as_dict()
        h = build_reduced(c)
        rng = np.random.default_rng([cfg.seed, 0 if label == "interacting" else 1])
        worst = 0.0
        for _ in range(probes):
            t = float(rng.uniform(0.5, cfg.t_max if cfg.t_max > 1 else 10.0))
            site = int(rng.integers(h.dimension))
            worst = max(worst, continuity_probe(h, t, sites=[site]))
        checks[f"continuity_{label}"] = {"residual": worst, "tolerance": threshold, "passed": worst < threshold}
        top = float(np.max(np.abs(h.spectrum.eigenvalues)))
        checks[f"spectral_radius_{label}"] = {"value": top, "bound": 3.0, "passed": top <= 3.0}
    if chain.b == chain.a + 1:
        g = _gauge_residual(chain.as_interacting())
        checks["kickback_gauge"] = {"residual": g, "passed": g == 0.0}
    return {"config": asdict(chain), "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.s > 40:
        raise ConfigError(f"verify needs s <= 40, got s={cfg.s}")
    report = verify_report(cfg)
    for name, c in report["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}  " + json.dumps({k: v for k, v in c.items() if k != "passed"}))
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(report, indent=2) + "\n")
    failing = [n for n, c in report["checks"].items() if not c["passed"]]
    if failing:
        print("failed: " + ", ".join(failing), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def amplitude_table(cfg: RunConfig) -> list[dict]:
    grid = time_grid(cfg.t_max, cfg.dt)
    site = terminal_site(cfg.s)
    rows = []
    h = build_reduced(cfg.chain)
    h0 = build_reduced(cfg.chain.as_free())
    psi0 = initial_state(h.indexing)
    inter = amplitude_series(h, psi0, grid, site)
    free = amplitude_series(h0, psi0, grid, site)
    for (t, z), (_, z0) in zip(inter, free):
        z = 0 - z  # avoid signed zeros in the output
        rows.append(
            {"t": t, "re": z.real, "im": z.imag, "abs": abs(z), "free_re": z0.real, "free_im": z0.imag, "free_abs": abs(z0)}
        )
    return rows


def cmd_amplitude(cfg: RunConfig) -> int:
    """Series of ``-psi_t(s-1, s)`` next to the free ``psi0_t(s-1, s)``."""
    rows = amplitude_table(cfg)
    fh, close = _open_out(cfg.out)
    try:
        if cfg.format == "csv":
            cols = list(rows[0])
            fh.write(",".join(cols) + "\n")
            for r in rows:
                fh.write(",".join(format(r[c], ".17g") for c in cols) + "\n")
        else:
            for r in rows:
                fh.write(json.dumps(r) + "\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _run_ensemble(cfg: RunConfig, chain: ChainConfig, seed: int | None = None):
    settings = cfg.sampler if seed is None else replace(cfg.sampler, seed=seed)
    return ensemble(build_reduced(chain), None, settings, workers=cfg.workers)


def cmd_sample(cfg: RunConfig) -> int:
    ens = _run_ensemble(cfg, cfg.chain)
    target = cfg.target_site
    from .stats import first_passage_time

    hits = [tr for tr in ens if first_passage_time(tr, target) is not None]
    kept = hits if cfg.hits_only else ens.trajectories
    if cfg.out is None:
        raise ConfigError("sample needs --out")
    write_trajectories(kept, cfg.out, cfg.format)
    summary = {
        "n_traj": len(ens),
        "target": list(target),
        "hits": len(hits),
        "hit_fraction": len(hits) / len(ens),
        "written": len(kept),
        "subdivision_overflows": ens.overflow_count,
    }
    print(json.dumps(summary))
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    """Conditional FPT and sojourn CDFs at the target, interacting and free."""
    if cfg.out is None:
        raise ConfigError("stats needs --out (a directory)")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    horizon = cfg.sampler.horizon
    summary: dict = {"target": list(cfg.target_site), "horizon": horizon}
    failed = []
    # the free ensemble uses seed + 1 so the two samples are independent
    for label, chain, path, seed in (
        ("interacting", cfg.chain.as_interacting(), cfg.input, cfg.seed),
        ("free", cfg.chain.as_free(), cfg.free_input, (cfg.seed + 1) % 2**64),
    ):
        trajs = read_trajectories(path, horizon) if path else _run_ensemble(cfg, chain, seed).trajectories
        try:
            st = conditional_cdfs(trajs, cfg.target_site, horizon)
        except EmptySubsampleError as exc:
            print(f"{label}: {exc}", file=sys.stderr)
            summary[label] = {"n": len(trajs), "hits": 0, "hit_fraction": 0.0}
            failed.append(label)
            continue
        st.fpt.write_csv(out / f"fpt_{label}.csv")
        st.sojourn.write_csv(out / f"sojourn_{label}.csv")
        summary[label] = st.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"verify": cmd_verify, "amplitude": cmd_amplitude, "sample": cmd_sample, "stats": cmd_stats}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg.mode](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
