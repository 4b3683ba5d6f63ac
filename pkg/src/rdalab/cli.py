"""Experiment runner: every verification campaign as a subcommand.

Config files are flat ``key = value`` text with one level of ``include``;
command-line ``--set key=value`` entries override file values. Every run
writes its artifacts under <outdir>/<experiment>/ together with a manifest
(config, config hash, package and dependency versions, wall time).

Exit codes: 0 pass, 2 config error, 3 numerical alarm, 4 structural alarm.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalAlarm, RdaLabError, StructuralAlarm
from .spectral import FourierField, random_real_field, sobolev_norm, write_field_csv
from .dynamics import (
    SYSTEM_CATALOG,
    dissipativity_report,
    export_norm_series_csv,
    export_trajectory_csv,
    integrate,
    make_system,
)

FMT = "%.17g"


def fmt(x):
    return FMT % float(x)


# -- config handling ---------------------------------------------------------------


def _coerce(raw):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in raw:
        return [_coerce(p) for p in raw.split(",") if p.strip()]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text, base_dir=None, allow_include=True):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key == "include":
            if not allow_include:
                raise ConfigError(f"line {lineno}: nested include not allowed")
            inc = Path(base_dir or ".") / raw
            if not inc.exists():
                raise ConfigError(f"line {lineno}: include file {inc} not found")
            included = parse_config_text(inc.read_text(), inc.parent,
                                         allow_include=False)
            for k, v in included.items():
                out.setdefault(k, v)
            continue
        out[key] = _coerce(raw)
    return out


def load_config(path=None, overrides=()):
    cfg = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {path} not found")
        cfg = parse_config_text(p.read_text(), p.parent)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        cfg[key.strip()] = _coerce(raw)
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


class Runner:
    def __init__(self, experiment, cfg, outdir):
        self.experiment = experiment
        self.cfg = cfg
        self.dir = Path(outdir) / experiment
        self.dir.mkdir(parents=True, exist_ok=True)
        self.t0 = time.time()
        self.alarms = []

    def path(self, name):
        return self.dir / name

    def finish(self, exit_code):
        import scipy

        manifest = {
            "experiment": self.experiment,
            "config": self.cfg,
            "config_hash": config_hash(self.cfg),
            "versions": {"rdalab": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "wall_time_s": time.time() - self.t0,
            "exit_code": exit_code,
            "alarms": self.alarms,
        }
        write_json(self.path("manifest.json"), manifest)
        return exit_code


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing config key '{key}'")
    return default


def _build_system(cfg):
    name = _get(cfg, "system", "advect-tanh")
    if name not in SYSTEM_CATALOG:
        raise ConfigError(f"unknown system '{name}' (have {sorted(SYSTEM_CATALOG)})")
    params = {}
    for key in ("amplitude", "g_amplitude", "radius"):
        if key in cfg:
            params[key] = cfg[key]
    if "cut" in cfg and name == "burgers":
        params["cut"] = cfg["cut"]
    return make_system(name, **params)


def _initial_field(cfg, rng, n_max):
    kind = _get(cfg, "u0", "random")
    amp = float(_get(cfg, "u0_H1", 1.0))
    if kind == "sin":
        u = FourierField.from_modes(n_max, {(0, 1): -0.5j, (0, -1): 0.5j})
        return u * (amp / sobolev_norm(u, 1.0))
    if kind == "random":
        return random_real_field(rng, n_max, decay=float(_get(cfg, "u0_decay", 2.0)),
                                 target_h1=amp)
    raise ConfigError(f"unknown initial data '{kind}'")


# -- subcommands -------------------------------------------------------------------


def cmd_simulate(cfg, outdir):
    run = Runner("simulate", cfg, outdir)
    rng = np.random.default_rng(int(_get(cfg, "seed", 0)))
    system = _build_system(cfg)
    n_max = int(_get(cfg, "nmax", 64))
    dt = float(_get(cfg, "dt", 1e-3))
    t_end = float(_get(cfg, "t_end", 1.0))
    u0 = _initial_field(cfg, rng, n_max)
    try:
        traj = integrate(system, u0, 0.0, t_end, dt,
                         record_stride=int(_get(cfg, "stride", 10)))
    except NumericalAlarm as err:
        run.alarms.append(str(err))
        if getattr(err, "trajectory", None) is not None:
            export_norm_series_csv(run.path("norms.csv"), err.trajectory)
        return run.finish(3)
    export_norm_series_csv(run.path("norms.csv"), traj)
    if bool(_get(cfg, "export_trajectory", False)):
        export_trajectory_csv(run.path("trajectory.csv"), traj)
    write_field_csv(run.path("final_state.csv"), traj.final)
    report = dissipativity_report(traj)
    write_json(run.path("dissipativity.json"), {
        "fits": report.fits, "violations": report.violations,
        "smoothing_bound": report.smoothing_bound,
    })
    if report.diverged:
        run.alarms.append("trajectory diverged")
        return run.finish(3)
    return run.finish(0)


def cmd_diffeo_probe(cfg, outdir):
    from .diffeo import (
        contraction_probe,
        factor_uniformity_probe,
        forward_map,
        inverse_map,
        loglog_slope,
    )

    run = Runner("diffeo-probe", cfg, outdir)
    rng = np.random.default_rng(int(_get(cfg, "seed", 0)))
    system = _build_system(cfg)
    k_list = _get(cfg, "K", [8, 16, 32, 64])
    if isinstance(k_list, (int, float)):
        k_list = [int(k_list)]
    k_list = [int(k) for k in k_list]
    n_max = int(_get(cfg, "nmax", 128))

    rows = contraction_probe(rng, k_list, n_max=n_max,
                             n_samples=int(_get(cfg, "samples", 5)))
    write_csv(run.path("contraction.csv"), ["k", "contraction"],
              [(r["k"], r["contraction"]) for r in rows])
    slope = loglog_slope([r["k"] for r in rows], [r["contraction"] for r in rows])

    uni = factor_uniformity_probe(system, rng, k_list,
                                  int(_get(cfg, "samples", 5)), n_max,
                                  float(_get(cfg, "ball", 5.0)))
    write_csv(run.path("uniformity.csv"), ["k", "w1inf_bound", "lipschitz"],
              [(r["k"], r["w1inf_bound"], r["lipschitz"]) for r in uni])

    k_round = int(_get(cfg, "roundtrip_K", 32))
    worst = 0.0
    for _ in range(int(_get(cfg, "roundtrip_samples", 5))):
        u = random_real_field(rng, 24, decay=2.0,
                              target_h1=rng.uniform(0.5, 5.0)).pad_to(96)
        w = forward_map(u, k_round, system)
        u2 = inverse_map(w, k_round, system)
        worst = max(worst, sobolev_norm(u2 - u, 1.0))
    write_json(run.path("probe.json"), {
        "contraction_slope": slope,
        "roundtrip_worst_h1": worst,
        "k_list": k_list,
    })
    if worst > float(_get(cfg, "roundtrip_tol", 1e-7)):
        run.alarms.append(f"round-trip error {worst:.3e}")
        return run.finish(3)
    return run.finish(0)


def cmd_transform_check(cfg, outdir):
    from .diffeo import loglog_slope
    from .transform import (
        conjugacy_check,
        f1_lipschitz_sweep,
        make_transformed,
        tail_report,
    )

    run = Runner("transform-check", cfg, outdir)
    rng = np.random.default_rng(int(_get(cfg, "seed", 0)))
    system = _build_system(cfg)
    r_bar = float(_get(cfg, "r_bar", 1.6))
    k_cut = int(_get(cfg, "K", 32))
    n_split = int(_get(cfg, "N", 8))
    n_max = int(_get(cfg, "nmax", 48))
    sys_tr = make_transformed(system, k_cut=k_cut, n_split=n_split, r_bar=r_bar)

    u0 = random_real_field(rng, n_max, decay=2.5,
                           target_h1=float(_get(cfg, "u0_H1", 0.8)))
    times, resid = conjugacy_check(u0, float(_get(cfg, "t_end", 2.0)), sys_tr,
                                   dt=float(_get(cfg, "dt", 1e-3)))
    write_csv(run.path("conjugacy.csv"), ["t", "residual_H1"],
              list(zip(times, resid)))

    rows = f1_lipschitz_sweep(system, [8, 16, 32, 64], rng,
                              n_samples=int(_get(cfg, "samples", 4)),
                              r_bar=r_bar)
    write_csv(run.path("f1_lipschitz.csv"), ["k", "lipschitz"],
              [(r["k"], r["lipschitz"]) for r in rows])
    slope = loglog_slope([r["k"] for r in rows], [r["lipschitz"] for r in rows])

    w0 = random_real_field(rng, n_max, decay=1.8, target_h1=0.8)
    w0 = w0 + 3.0 * (random_real_field(rng, n_max, decay=1.6, target_h1=1.0)
                     - random_real_field(rng, n_max, decay=1.6, target_h1=1.0))
    traj = integrate(sys_tr, w0, 0.0, float(_get(cfg, "tail_t_end", 1.5)),
                     float(_get(cfg, "dt", 1e-3)), record_stride=20)
    tail = tail_report(traj, float(_get(cfg, "kappa", 0.25)), n_split)
    write_json(run.path("transform.json"), {
        "conjugacy_max_residual": float(np.max(resid)),
        "f1_slope": slope,
        "tail": {"alpha": tail.alpha, "r_kappa": tail.r_kappa,
                 "feasible": tail.feasible},
    })
    if np.max(resid) > float(_get(cfg, "conjugacy_tol", 1e-5)):
        run.alarms.append(f"conjugacy residual {np.max(resid):.3e}")
        return run.finish(3)
    return run.finish(0)


def cmd_cone(cfg, outdir):
    from .cone import (
        gap_audit,
        measure_constants,
        negative_control_cut,
        run_cone_check,
    )
    from .transform import make_transformed

    run = Runner("cone", cfg, outdir)
    rng = np.random.default_rng(int(_get(cfg, "seed", 0)))
    system = _build_system(cfg)
    r_bar = float(_get(cfg, "r_bar", 1.6))
    k_cut = int(_get(cfg, "K", 32))
    consts = measure_constants(system, k_cut, rng, r_bar=r_bar,
                               n_samples=int(_get(cfg, "samples", 4)))
    audit = gap_audit(consts, k_cut)
    write_json(run.path("gap_audit.json"), audit)
    n_split = int(_get(cfg, "N", 0)) or max(4, audit["min_feasible_n"] or 4)
    k_neg = negative_control_cut(consts)
    write_json(run.path("negative_control.json"), {
        "k_neg": k_neg,
        "audit": gap_audit(consts, k_neg) if k_neg else None,
    })

    sys_tr = make_transformed(system, k_cut=k_cut, n_split=n_split, r_bar=r_bar,
                              solver_damping=1.0)
    n_max = int(_get(cfg, "nmax", 48))
    n_samples = int(_get(cfg, "cone_samples", 10))
    dt = float(_get(cfg, "dt", 1e-3))
    t_end = float(_get(cfg, "t_end", 0.2))
    rows, violations = [], 0
    seed_state = integrate(
        sys_tr, random_real_field(rng, n_max, decay=2.5, target_h1=0.8),
        0.0, 0.4, dt).final
    for i in range(n_samples):
        w0 = seed_state + 0.05 * random_real_field(rng, n_max, decay=2.0,
                                                   target_h1=1.0)
        xi0 = random_real_field(rng, n_max, decay=1.8, target_h1=1.0)
        rep = run_cone_check(sys_tr, w0, xi0, t_end, dt=dt,
                             tol=float(_get(cfg, "tol", 1e-6)))
        violations += rep.violations
        rows.append((i, rep.violations, rep.margin))
    write_csv(run.path("cone_campaign.csv"), ["sample", "violations", "margin"],
              rows)
    write_json(run.path("cone.json"), {
        "n_split": n_split, "k_cut": k_cut, "violations": violations,
        "constants": vars(consts),
    })
    if violations:
        run.alarms.append(f"{violations} cone violations")
        return run.finish(3)
    return run.finish(0)


def cmd_floquet(cfg, outdir):
    from .floquet import (
        FloquetConfig,
        assemble_period_map,
        compare_period_maps,
        pde_half_structure_check,
        power_decay_report,
        printed_multiplier_check,
        run_trajectory_pair,
        run_symmetrized_check,
    )

    run = Runner("floquet", cfg, outdir)
    fcfg = FloquetConfig.build(T=float(_get(cfg, "T", 10.0)),
                               n_max=int(_get(cfg, "nmax", 24)))
    method = _get(cfg, "method", "block-ode")
    try:
        pm = assemble_period_map(fcfg, method,
                                 n_pde=int(_get(cfg, "n_pde", 4)),
                                 dt=float(_get(cfg, "pde_dt", 1e-3)))
    except StructuralAlarm as err:
        run.alarms.append(str(err))
        return run.finish(4)
    rows = []
    for (rk, ck), (lm, sg) in sorted(pm.entries.items(),
                                     key=lambda kv: (kv[0][1], kv[0][0])):
        rows.append((ck[0], ck[1], rk[0], rk[1], lm, np.real(sg), np.imag(sg)))
    write_csv(run.path("period_map.csv"),
              ["col_family", "col_n", "row_family", "row_n", "log_magnitude",
               "sign_re", "sign_im"], rows)
    decay = power_decay_report(pm, int(_get(cfg, "n_powers", 6)))
    write_json(run.path("decay_fit.json"), decay)
    write_json(run.path("printed_forms.json"), printed_multiplier_check(fcfg))

    if bool(_get(cfg, "extended", False)):
        pert = FourierField.zeros(int(_get(cfg, "extended_nmax", 64)), 2)
        pert.coeffs[0, pert.n_max] = float(_get(cfg, "perturbation", 1e-3))
        pair = run_trajectory_pair(fcfg, pert,
                                   n_periods=int(_get(cfg, "periods", 4)),
                                   dt=float(_get(cfg, "extended_dt", 5e-3)),
                                   n_max=pert.n_max)
        write_csv(run.path("trajectory_pair.csv"), ["t", "diff_H1"],
                  list(zip(pair.times, pair.diff_energy)))
        write_json(run.path("pair_fit.json"), {
            "gamma": pair.gamma, "r_squared": pair.r_squared,
            "y_circle_residual": pair.y_circle_residual,
            "z_drift": pair.z_drift,
        })
    if bool(_get(cfg, "symmetrize", False)):
        pert = FourierField.zeros(int(_get(cfg, "sym_nmax", 32)), 2)
        pert.coeffs[0, pert.n_max] = float(_get(cfg, "perturbation", 1e-3))
        sym = run_symmetrized_check(fcfg, pert,
                                    t_end=float(_get(cfg, "sym_t_end", 2.0)),
                                    dt=float(_get(cfg, "sym_dt", 5e-3)))
        write_json(run.path("symmetrize.json"), sym)
    return run.finish(0)


def cmd_report(cfg, outdir):
    run = Runner("report", cfg, outdir)
    rows = []
    for manifest in sorted(Path(outdir).glob("*/manifest.json")):
        data = json.loads(manifest.read_text())
        rows.append((data["experiment"], data["exit_code"],
                     f'{data["wall_time_s"]:.1f}s',
                     ";".join(data.get("alarms", [])) or "-"))
    width = max((len(r[0]) for r in rows), default=10)
    lines = [f'{"experiment".ljust(width)}  exit  time     alarms']
    for name, code, wall, alarms in rows:
        lines.append(f"{name.ljust(width)}  {code}     {wall.ljust(8)} {alarms}")
    text = "\n".join(lines)
    print(text)
    (run.dir / "summary.txt").write_text(text + "\n")
    return run.finish(0)


COMMANDS = {
    "simulate": cmd_simulate,
    "diffeo-probe": cmd_diffeo_probe,
    "transform-check": cmd_transform_check,
    "cone": cmd_cone,
    "floquet": cmd_floquet,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rdalab",
        description="Spectral verification lab for 1D periodic RDA systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--outdir", default="out")
        if name == "floquet":
            p.add_argument("--T", type=float, default=None)
            p.add_argument("--nmax", type=int, default=None)
            p.add_argument("--method", default=None,
                           choices=["block-ode", "full-pde", "both"])
        if name == "simulate":
            p.add_argument("--system", default=None)
        if name == "diffeo-probe":
            p.add_argument("--K", default=None, help="comma list of mode cuts")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        for key in ("T", "nmax", "method", "system", "K"):
            val = getattr(args, key, None)
            if val is not None:
                cfg[key] = _coerce(str(val))
        code = COMMANDS[args.command](cfg, args.outdir)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except StructuralAlarm as err:
        print(f"structural alarm: {err}", file=sys.stderr)
        return 4
    except NumericalAlarm as err:
        print(f"numerical alarm: {err}", file=sys.stderr)
        return 3
    except RdaLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
